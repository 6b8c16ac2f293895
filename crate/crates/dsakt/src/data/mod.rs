//! Interaction data: ingestion of raw logs, identifier remapping, windowing
//! into fixed-length training samples, user-level splits, and a synthetic
//! student generator with an exact Bayes-filter oracle.

pub mod ingest;
pub mod synth;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use ingest::{
    parse_interaction_log, parse_with_vocabulary, write_canonical, IngestReport, LogFormat,
};
pub use synth::{generate_synthetic, BktParams, SyntheticData, SyntheticSkillModel};

/// One raw log row before remapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionRecord {
    pub user_id: String,
    pub exercise_id: String,
    pub correct: u8,
    pub timestamp: i64,
}

/// One (exercise, correctness) pair after identifier remapping.
/// Exercise indices are 1-based; 0 is the padding sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub exercise: u32,
    pub correct: u8,
}

/// A student's chronologically ordered interactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSequence {
    pub user_id: String,
    pub interactions: Vec<Interaction>,
}

/// Bijection between opaque exercise ids and indices in [1, e].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from ids in first-appearance order.
    pub fn from_ids<I: IntoIterator<Item = String>>(ids: I) -> Self {
        let mut v = Self::new();
        for id in ids {
            v.intern(&id);
        }
        v
    }

    /// Index for `id`, inserting it at the next free index if unseen.
    pub fn intern(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32 + 1;
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn exercise_count(&self) -> u32 {
        self.ids.len() as u32
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: u32) -> Option<&str> {
        if index == 0 {
            return None;
        }
        self.ids.get(index as usize - 1).map(|s| s.as_str())
    }

    /// Ids in index order (index 1 first). Padding index 0 has no id.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Fixed-length training sample. All four vectors have length k.
/// Position t pairs the interaction at step t with the exercise of step t+1:
/// `query_tokens[t]` is the next exercise and `targets[t]` its correctness.
/// Real positions come first; the tail is padded with token 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedWindow {
    pub interaction_tokens: Vec<u32>,
    pub query_tokens: Vec<u32>,
    pub targets: Vec<u8>,
    pub valid_mask: Vec<u8>,
}

impl EncodedWindow {
    pub fn len(&self) -> usize {
        self.interaction_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interaction_tokens.is_empty()
    }

    pub fn valid_len(&self) -> usize {
        self.valid_mask.iter().filter(|&&v| v != 0).count()
    }
}

/// Fold an (exercise, correctness) pair into one token: r * e + E, in [1, 2e].
pub fn encode_interaction(exercise: u32, correct: u8, e: u32) -> Result<u32> {
    if exercise == 0 || exercise > e {
        return Err(Error::ExerciseOutOfRange {
            index: exercise,
            max: e,
        });
    }
    Ok(u32::from(correct) * e + exercise)
}

/// Inverse of [`encode_interaction`]: token in [1, 2e] back to (E, r).
pub fn decode_interaction(token: u32, e: u32) -> Result<(u32, u8)> {
    if token == 0 || token > 2 * e {
        return Err(Error::TokenOutOfRange {
            token,
            max: 2 * e,
        });
    }
    let correct = ((token - 1) / e) as u8;
    let exercise = token - u32::from(correct) * e;
    Ok((exercise, correct))
}

/// Cut one user's sequence into consecutive disjoint spans of k interactions,
/// each with a one-step lookahead for queries and targets. A trailing span
/// with m >= 1 lookahead pairs fills positions 1..m and right-pads the rest
/// with token 0. Sequences shorter than 2 yield no windows.
pub fn window_user(seq: &UserSequence, k: usize, e: u32) -> Result<Vec<EncodedWindow>> {
    assert!(k >= 1, "window length must be >= 1");
    let n = seq.interactions.len();
    let mut windows = Vec::new();
    let mut start = 0usize;
    while start + 1 < n {
        let m = (n - 1 - start).min(k); // lookahead pairs available in this span
        let mut w = EncodedWindow {
            interaction_tokens: vec![0; k],
            query_tokens: vec![0; k],
            targets: vec![0; k],
            valid_mask: vec![0; k],
        };
        for t in 0..m {
            let cur = seq.interactions[start + t];
            let next = seq.interactions[start + t + 1];
            w.interaction_tokens[t] = encode_interaction(cur.exercise, cur.correct, e)?;
            w.query_tokens[t] = next.exercise;
            w.targets[t] = next.correct;
            w.valid_mask[t] = 1;
        }
        windows.push(w);
        start += k;
    }
    Ok(windows)
}

/// Window every sequence; windows keep the order of the input sequences.
pub fn window_dataset(seqs: &[UserSequence], k: usize, e: u32) -> Result<Vec<EncodedWindow>> {
    let mut out = Vec::new();
    for s in seqs {
        out.extend(window_user(s, k, e)?);
    }
    Ok(out)
}

/// Deterministic RNG substream: `seed` in the first 8 bytes, `stream` in the
/// next 8. Distinct streams never collide for distinct (seed, stream) pairs.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Split at user granularity: shuffle users with the seeded RNG and take
/// round(ratio * n) for the train side. No user appears on both sides.
pub fn split_dataset(
    sequences: Vec<UserSequence>,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<UserSequence>, Vec<UserSequence>)> {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must be in (0, 1)");
    let n = sequences.len();
    if n < 2 {
        return Err(Error::TooFewUsers(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, 0));
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut train_flags = vec![false; n];
    for &i in order.iter().take(n_train) {
        train_flags[i] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (i, s) in sequences.into_iter().enumerate() {
        if train_flags[i] {
            train.push(s);
        } else {
            test.push(s);
        }
    }
    Ok((train, test))
}
