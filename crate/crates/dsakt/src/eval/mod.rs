//! Ranking and accuracy metrics over masked predictions, plus attention
//! weight export for visualization.

use std::io::Write;

use ndarray::NdFloat;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::EncodedWindow;
use crate::error::{Error, Result};
use crate::kernel::BCE_CLAMP;
use crate::model::Model;

/// Area under the ROC curve via the rank-sum (Mann-Whitney) formulation,
/// with average ranks for ties. O(n log n).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "auc",
            left: vec![scores.len()],
            right: vec![labels.len()],
        });
    }
    if scores.len() < 2 {
        return Err(Error::TooFewScores(scores.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // average 1-based rank within each tie group
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &ix in &order[i..=j] {
            if labels[ix] != 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// AUC of the synthetic generator's Bayes-filter probabilities; the yardstick
/// a trained model is compared against.
pub fn oracle_auc(oracle_probs: &[f64], labels: &[u8]) -> Result<f64> {
    auc(oracle_probs, labels)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub accuracy: f64,
    pub scored_positions: usize,
    pub mean_bce: f64,
}

/// Score every window and pool (probability, target) pairs over valid
/// positions. Windows are scored in parallel; the pooled order is the input
/// order, so results are deterministic.
pub fn pool_predictions<F: NdFloat>(
    model: &Model<F>,
    windows: &[EncodedWindow],
) -> Result<(Vec<f64>, Vec<u8>)> {
    let per_window: Vec<Result<Vec<(f64, u8)>>> = windows
        .par_iter()
        .map(|w| {
            let probs = model.probabilities(w)?;
            Ok(w.valid_mask
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0)
                .map(|(t, _)| (probs[t].to_f64().unwrap(), w.targets[t]))
                .collect())
        })
        .collect();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in per_window {
        for (s, l) in r? {
            scores.push(s);
            labels.push(l);
        }
    }
    Ok((scores, labels))
}

/// Pooled metrics over the valid positions of `windows`. Accuracy uses
/// threshold 0.5 with the tie rule score >= 0.5 -> predict 1.
pub fn evaluate<F: NdFloat>(model: &Model<F>, windows: &[EncodedWindow]) -> Result<EvalReport> {
    let (scores, labels) = pool_predictions(model, windows)?;
    metrics_from_pool(&scores, &labels)
}

pub fn metrics_from_pool(scores: &[f64], labels: &[u8]) -> Result<EvalReport> {
    let auc_value = auc(scores, labels)?;
    let mut correct = 0usize;
    let mut bce_sum = 0.0f64;
    for (&s, &l) in scores.iter().zip(labels.iter()) {
        let predicted = u8::from(s >= 0.5);
        if predicted == l {
            correct += 1;
        }
        let p = s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        bce_sum += if l != 0 { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(EvalReport {
        auc: auc_value,
        accuracy: correct as f64 / scores.len() as f64,
        scored_positions: scores.len(),
        mean_bce: bce_sum / scores.len() as f64,
    })
}

/// Dump every allowed attention weight as delimiter-separated text with the
/// header `window,block,stage,head,query_pos,key_pos,weight`. Query positions
/// are 0-based; padded queries and masked keys (key_pos > query_pos) are
/// omitted.
pub fn export_attention<F: NdFloat>(
    model: &Model<F>,
    windows: &[EncodedWindow],
    mut out: impl Write,
) -> Result<()> {
    writeln!(out, "window,block,stage,head,query_pos,key_pos,weight")?;
    for (wi, window) in windows.iter().enumerate() {
        let (_, trace) = model.forward(window)?;
        let valid = window.valid_len();
        for (bi, blk) in trace.attention.iter().enumerate() {
            for (stage, weights) in [
                ("encoder_self", &blk.encoder_self),
                ("decoder_self", &blk.decoder_self),
                ("decoder_cross", &blk.decoder_cross),
            ] {
                for h in 0..weights.shape()[0] {
                    for q in 0..valid {
                        for k in 0..=q {
                            writeln!(
                                out,
                                "{wi},{bi},{stage},{h},{q},{k},{}",
                                weights[[h, q, k]]
                            )?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ParamSet};

    /// O(n^2) pairwise oracle: P(score_pos > score_neg) with ties at 1/2.
    fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] == 0 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_separation_is_one() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn hand_case_three_of_four_pairs() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1, 0, 1, 0];
        let expect = auc_pairwise(&scores, &labels);
        assert_eq!(expect, 0.75);
        assert!((auc(&scores, &labels).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rank_auc_matches_pairwise_oracle_with_ties() {
        use rand::Rng;
        for seed in 0..50u64 {
            let mut rng = crate::data::substream(seed, 3);
            let n = rng.random_range(2..40);
            // coarse grid of scores forces plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u32) as u8).collect();
            labels[0] = 1;
            if labels.iter().all(|&l| l == 1) {
                labels[n - 1] = 0;
            } else if labels.iter().all(|&l| l == 0) {
                labels[0] = 1;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            assert!(
                (fast - slow).abs() < 1e-12,
                "seed {seed}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        use rand::Rng;
        let mut rng = crate::data::substream(9, 4);
        let scores: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<u8> = (0..200).map(|i| u8::from(i % 3 == 0)).collect();
        let a = auc(&scores, &labels).unwrap();
        let cubed: Vec<f64> = scores.iter().map(|&s| s * s * s).collect();
        let b = auc(&cubed, &labels).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn auc_of_negated_scores_complements() {
        use rand::Rng;
        let mut rng = crate::data::substream(10, 5);
        // continuous scores: ties have probability zero
        let scores: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<u8> = (0..300).map(|_| rng.random_range(0..=1u32) as u8).collect();
        let neg: Vec<f64> = scores.iter().map(|&s| -s).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&neg, &labels).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_and_empty_are_distinct_errors() {
        assert!(matches!(
            auc(&[0.3, 0.4], &[1, 1]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(auc(&[], &[]), Err(Error::TooFewScores(0))));
        assert!(matches!(auc(&[0.5], &[1]), Err(Error::TooFewScores(1))));
    }

    #[test]
    fn constant_predictor_gets_half_auc_and_base_rate_accuracy() {
        // probabilities exactly 0.5 classify as positive (>= threshold)
        let scores = vec![0.5; 10];
        let labels = vec![1, 0, 1, 1, 0, 1, 0, 1, 1, 0];
        let report = metrics_from_pool(&scores, &labels).unwrap();
        assert_eq!(report.auc, 0.5);
        let pos_rate = 6.0 / 10.0;
        assert_eq!(report.accuracy, pos_rate);
        assert_eq!(report.scored_positions, 10);
    }

    #[test]
    fn perfect_oracle_scores_auc_one() {
        let labels = vec![1, 0, 0, 1, 1];
        let scores: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_generator_hits_single_class_path() {
        use crate::data::{generate_synthetic, BktParams, SyntheticSkillModel};
        let model = SyntheticSkillModel::uniform(
            BktParams {
                p_init: 1.0,
                p_learn: 0.0,
                p_slip: 0.0,
                p_guess: 0.1,
            },
            2,
            2,
        );
        let data = generate_synthetic(&model, 5, 10, 3).unwrap();
        let scores: Vec<f64> = data.oracle_probs.iter().flatten().copied().collect();
        let labels: Vec<u8> = data
            .sequences
            .iter()
            .flat_map(|s| s.interactions.iter().map(|i| i.correct))
            .collect();
        assert!(matches!(
            oracle_auc(&scores, &labels),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn uninformative_oracle_scores_half() {
        use crate::data::{generate_synthetic, BktParams, SyntheticSkillModel};
        // frozen unmastered state: constant guess probability
        let model = SyntheticSkillModel::uniform(
            BktParams {
                p_init: 0.0,
                p_learn: 0.0,
                p_slip: 0.0,
                p_guess: 0.2,
            },
            2,
            2,
        );
        let data = generate_synthetic(&model, 40, 25, 4).unwrap();
        let scores: Vec<f64> = data.oracle_probs.iter().flatten().copied().collect();
        let labels: Vec<u8> = data
            .sequences
            .iter()
            .flat_map(|s| s.interactions.iter().map(|i| i.correct))
            .collect();
        assert_eq!(oracle_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn reference_generator_oracle_auc_regression() {
        use crate::data::{generate_synthetic, BktParams, SyntheticSkillModel};
        // frozen once from the reference run: 10 skills x 2 exercises,
        // (0.4, 0.3, 0.1, 0.2), 200 users x length 50, seed 7
        let model = SyntheticSkillModel::uniform(
            BktParams {
                p_init: 0.4,
                p_learn: 0.3,
                p_slip: 0.1,
                p_guess: 0.2,
            },
            10,
            2,
        );
        let data = generate_synthetic(&model, 200, 50, 7).unwrap();
        let scores: Vec<f64> = data.oracle_probs.iter().flatten().copied().collect();
        let labels: Vec<u8> = data
            .sequences
            .iter()
            .flat_map(|s| s.interactions.iter().map(|i| i.correct))
            .collect();
        let value = oracle_auc(&scores, &labels).unwrap();
        assert!(value > 0.5 && value < 1.0);
        assert!(
            (value - 0.752_822_578_266_921_45).abs() < 1e-12,
            "regression moved: {value:.17}"
        );
    }

    #[test]
    fn evaluate_never_reads_padded_targets() {
        let cfg = ModelConfig::new(4, 3, 8, 2).unwrap();
        let model: Model<f64> = Model::init(cfg, 13).unwrap();
        let mut windows = vec![
            EncodedWindow {
                interaction_tokens: vec![1, 6, 0],
                query_tokens: vec![2, 3, 0],
                targets: vec![1, 0, 0],
                valid_mask: vec![1, 1, 0],
            },
            EncodedWindow {
                interaction_tokens: vec![4, 2, 7],
                query_tokens: vec![1, 4, 2],
                targets: vec![0, 1, 1],
                valid_mask: vec![1, 1, 1],
            },
        ];
        let before = evaluate(&model, &windows).unwrap();
        windows[0].targets[2] = 1; // corrupt a padded target
        let after = evaluate(&model, &windows).unwrap();
        assert_eq!(before.auc, after.auc);
        assert_eq!(before.accuracy, after.accuracy);
        assert_eq!(before.scored_positions, 5);
    }

    #[test]
    fn export_single_position_window() {
        let cfg = ModelConfig::new(3, 1, 4, 2).unwrap();
        let model: Model<f64> = Model::init(cfg, 21).unwrap();
        let w = EncodedWindow {
            interaction_tokens: vec![2],
            query_tokens: vec![1],
            targets: vec![1],
            valid_mask: vec![1],
        };
        let mut buf = Vec::new();
        export_attention(&model, &[w], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // header + h records per stage per block = 1 + 2 * 3
        assert_eq!(lines.len(), 1 + 6);
        for line in &lines[1..] {
            assert!(line.ends_with(",1"), "weight must be 1.0: {line}");
        }
    }

    #[test]
    fn export_respects_mask_and_padding() {
        let cfg = ModelConfig::new(4, 4, 8, 2).unwrap();
        let model: Model<f64> = Model::init(cfg, 22).unwrap();
        let w = EncodedWindow {
            interaction_tokens: vec![1, 5, 0, 0],
            query_tokens: vec![2, 3, 0, 0],
            targets: vec![1, 0, 0, 0],
            valid_mask: vec![1, 1, 0, 0],
        };
        let mut buf = Vec::new();
        export_attention(&model, &[w], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            let q: usize = parts[4].parse().unwrap();
            let k: usize = parts[5].parse().unwrap();
            assert!(k <= q, "masked key exported: {line}");
            assert!(q < 2, "padded query exported: {line}");
        }
    }

    #[test]
    fn export_is_deterministic() {
        let cfg = ModelConfig::new(4, 3, 8, 2).unwrap();
        let params = ParamSet::init(&cfg, 8);
        let model: Model<f32> = Model::new(cfg, params).unwrap();
        let w = EncodedWindow {
            interaction_tokens: vec![3, 7, 2],
            query_tokens: vec![4, 2, 1],
            targets: vec![0, 1, 1],
            valid_mask: vec![1, 1, 1],
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        export_attention(&model, std::slice::from_ref(&w), &mut a).unwrap();
        export_attention(&model, std::slice::from_ref(&w), &mut b).unwrap();
        assert_eq!(a, b);
    }
}
