//! Synthetic students driven by per-skill two-state learning dynamics
//! (learn/slip/guess), together with the exact forward Bayes filter over the
//! same dynamics. The filter's predictive probabilities are the best any
//! model can do on this data, which makes them a verifiable yardstick.

use rand::Rng;

use crate::error::{Error, Result};

use super::{substream, Interaction, UserSequence, Vocabulary};

/// Two-state skill dynamics: a latent mastered/unmastered state, mastery
/// acquired with `p_learn` after each opportunity, answers flipped by
/// `p_slip` (mastered) or `p_guess` (unmastered).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BktParams {
    pub p_init: f64,
    pub p_learn: f64,
    pub p_slip: f64,
    pub p_guess: f64,
}

impl BktParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("p_init", self.p_init),
            ("p_learn", self.p_learn),
            ("p_slip", self.p_slip),
            ("p_guess", self.p_guess),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        // identifiability: guessing must not beat honest mastery
        if self.p_guess >= 1.0 - self.p_slip {
            return Err(Error::UnidentifiableSkill {
                guess: self.p_guess,
                slip: self.p_slip,
            });
        }
        Ok(())
    }

    fn predictive(&self, p_know: f64) -> f64 {
        p_know * (1.0 - self.p_slip) + (1.0 - p_know) * self.p_guess
    }
}

/// Skill inventory for the generator. Exercise indices are assigned
/// consecutively per skill: skill 0 owns indices 1..=n_0, skill 1 the next
/// n_1, and so on.
#[derive(Debug, Clone)]
pub struct SyntheticSkillModel {
    pub skills: Vec<BktParams>,
    pub exercises_per_skill: Vec<usize>,
}

impl SyntheticSkillModel {
    /// Same parameters and the same exercise count for every skill.
    pub fn uniform(params: BktParams, n_skills: usize, exercises_per_skill: usize) -> Self {
        Self {
            skills: vec![params; n_skills],
            exercises_per_skill: vec![exercises_per_skill; n_skills],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.skills.is_empty() || self.skills.len() != self.exercises_per_skill.len() {
            return Err(Error::RunConfig(
                "skill model needs one exercise count per skill".into(),
            ));
        }
        for s in &self.skills {
            s.validate()?;
        }
        if self.exercises_per_skill.iter().any(|&n| n == 0) {
            return Err(Error::RunConfig("every skill needs >= 1 exercise".into()));
        }
        Ok(())
    }

    pub fn exercise_count(&self) -> u32 {
        self.exercises_per_skill.iter().sum::<usize>() as u32
    }

    /// Skill owning a 1-based exercise index.
    pub fn skill_of(&self, exercise: u32) -> usize {
        let mut cum = 0u32;
        for (s, &n) in self.exercises_per_skill.iter().enumerate() {
            cum += n as u32;
            if exercise <= cum {
                return s;
            }
        }
        self.exercises_per_skill.len() - 1
    }

    fn first_exercise_of(&self, skill: usize) -> u32 {
        self.exercises_per_skill[..skill]
            .iter()
            .sum::<usize>() as u32
            + 1
    }
}

#[derive(Debug)]
pub struct SyntheticData {
    pub sequences: Vec<UserSequence>,
    /// One exact predictive probability per interaction, same order.
    pub oracle_probs: Vec<Vec<f64>>,
    pub vocabulary: Vocabulary,
}

/// Exact Bayes filter over one skill's two-state dynamics. Tracks
/// P(mastered | observations so far) and exposes the predictive
/// probability of a correct answer before each observation.
#[derive(Debug, Clone, Copy)]
pub struct BayesFilter {
    params: BktParams,
    p_know: f64,
}

impl BayesFilter {
    pub fn new(params: BktParams) -> Self {
        Self {
            params,
            p_know: params.p_init,
        }
    }

    /// P(correct on the next opportunity | history).
    pub fn predict(&self) -> f64 {
        self.params.predictive(self.p_know)
    }

    /// Condition on an observed outcome, then apply the learning transition.
    pub fn observe(&mut self, correct: bool) {
        let p = self.params;
        let like_know = if correct { 1.0 - p.p_slip } else { p.p_slip };
        let like_unknow = if correct { p.p_guess } else { 1.0 - p.p_guess };
        let denom = self.p_know * like_know + (1.0 - self.p_know) * like_unknow;
        let posterior = if denom > 0.0 {
            self.p_know * like_know / denom
        } else {
            self.p_know // degenerate evidence; keep the prior
        };
        self.p_know = posterior + (1.0 - posterior) * p.p_learn;
    }
}

/// Generate `n_users` students of `seq_len` interactions each. Every user
/// draws from an independent seeded substream, so generation is
/// deterministic regardless of evaluation order.
pub fn generate_synthetic(
    model: &SyntheticSkillModel,
    n_users: usize,
    seq_len: usize,
    seed: u64,
) -> Result<SyntheticData> {
    model.validate()?;
    let n_skills = model.skills.len();
    let e = model.exercise_count();
    let vocabulary = Vocabulary::from_ids((1..=e).map(|i| format!("x{i}")));

    let mut sequences = Vec::with_capacity(n_users);
    let mut oracle_probs = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let mut rng = substream(seed, u as u64 + 1);
        let mut mastered: Vec<bool> = model
            .skills
            .iter()
            .map(|p| rng.random_bool(p.p_init))
            .collect();
        let mut filters: Vec<BayesFilter> =
            model.skills.iter().map(|&p| BayesFilter::new(p)).collect();

        let mut interactions = Vec::with_capacity(seq_len);
        let mut probs = Vec::with_capacity(seq_len);
        for _ in 0..seq_len {
            let skill = rng.random_range(0..n_skills);
            let n_ex = model.exercises_per_skill[skill] as u32;
            let exercise = model.first_exercise_of(skill) + rng.random_range(0..n_ex);
            let p = model.skills[skill];
            let p_correct = if mastered[skill] {
                1.0 - p.p_slip
            } else {
                p.p_guess
            };
            let correct = rng.random_bool(p_correct);

            probs.push(filters[skill].predict());
            filters[skill].observe(correct);
            if !mastered[skill] {
                mastered[skill] = rng.random_bool(p.p_learn);
            }
            interactions.push(Interaction {
                exercise,
                correct: u8::from(correct),
            });
        }
        sequences.push(UserSequence {
            user_id: format!("u{}", u + 1),
            interactions,
        });
        oracle_probs.push(probs);
    }
    Ok(SyntheticData {
        sequences,
        oracle_probs,
        vocabulary,
    })
}
