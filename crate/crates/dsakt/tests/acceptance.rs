//! Acceptance suite. Each test is one numbered criterion and prints a
//! PASS line with its measured values (visible via --nocapture or on
//! failure). Run with: cargo test --test acceptance -- --nocapture

use std::process::Command;

use dsakt::data::{
    encode_interaction, generate_synthetic, split_dataset, substream, window_dataset, BktParams,
    EncodedWindow, SyntheticSkillModel,
};
use dsakt::eval::{auc, evaluate, export_attention, oracle_auc};
use dsakt::kernel::{grad_check, ParamTensors};
use dsakt::model::{param_count, Model, ModelConfig, ParamSet};
use dsakt::train::{fit, noam_lr, OptimizerState, TrainConfig};
use rand::Rng;

const REF_BKT: BktParams = BktParams {
    p_init: 0.4,
    p_learn: 0.3,
    p_slip: 0.1,
    p_guess: 0.2,
};

fn grad_check_config() -> ModelConfig {
    ModelConfig::new(7, 5, 8, 2).unwrap().with_ffn_dim(8)
}

fn random_window(cfg: &ModelConfig, seed: u64) -> EncodedWindow {
    let mut rng = substream(seed, 1000);
    let k = cfg.window_len;
    let e = cfg.exercise_count as u32;
    let valid = rng.random_range(1..=k);
    let mut w = EncodedWindow {
        interaction_tokens: vec![0; k],
        query_tokens: vec![0; k],
        targets: vec![0; k],
        valid_mask: vec![0; k],
    };
    for t in 0..valid {
        let ex = rng.random_range(1..=e);
        let correct = rng.random_range(0..=1u32) as u8;
        w.interaction_tokens[t] = encode_interaction(ex, correct, e).unwrap();
        w.query_tokens[t] = rng.random_range(1..=e);
        w.targets[t] = rng.random_range(0..=1u32) as u8;
        w.valid_mask[t] = 1;
    }
    w
}

#[test]
fn c01_gradient_fidelity() {
    // e=7, k=5, d=8, h=2, d_ff=8, one block, 64-bit, 5 seeds, fd step 1e-5,
    // max relative error < 1e-4 on every parameter of the masked BCE loss
    let cfg = grad_check_config();
    let mut worst_overall = 0.0f64;
    for seed in [101u64, 202, 303, 404, 505] {
        let window = random_window(&cfg, seed);
        let model: Model<f64> = Model::init(cfg.clone(), seed).unwrap();
        let mut analytic = ParamSet::zeros(&cfg);
        model.loss_and_grad(&window, &mut analytic, None).unwrap();

        let mut probe = model.params.clone();
        let report = grad_check(
            &mut probe,
            &analytic,
            |p| {
                let m = Model::new(cfg.clone(), p.clone()).unwrap();
                m.loss(&window)
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(
            report.pass,
            "seed {seed}: worst rel err {} in {:?}",
            report.worst(),
            report
                .entries
                .iter()
                .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap())
                .map(|e| &e.name)
        );
        worst_overall = worst_overall.max(report.worst());
    }
    println!(
        "ACCEPTANCE 1 PASS: gradient fidelity, 5 seeds, worst rel err {worst_overall:.2e} < 1e-4"
    );
}

#[test]
fn c02_causality_suite() {
    // 100 random windows; perturbing both token streams at positions > t
    // leaves the probability at position t bit-identical
    let cfg = ModelConfig::new(9, 8, 16, 4).unwrap();
    let model: Model<f32> = Model::init(cfg.clone(), 7).unwrap();
    let e = cfg.exercise_count as u32;
    let mut checks = 0usize;
    for wi in 0..100u64 {
        let window = random_window(&cfg, 5000 + wi);
        let base = model.probabilities(&window).unwrap();
        let mut rng = substream(wi, 77);
        for t in 0..cfg.window_len - 1 {
            let mut perturbed = window.clone();
            for s in (t + 1)..cfg.window_len {
                let ex = rng.random_range(1..=e);
                let correct = rng.random_range(0..=1u32) as u8;
                perturbed.interaction_tokens[s] =
                    encode_interaction(ex, correct, e).unwrap();
                perturbed.query_tokens[s] = rng.random_range(1..=e);
            }
            let probs = model.probabilities(&perturbed).unwrap();
            for s in 0..=t {
                assert_eq!(
                    base[s].to_bits(),
                    probs[s].to_bits(),
                    "window {wi}, boundary {t}, position {s}"
                );
                checks += 1;
            }
        }
    }
    println!("ACCEPTANCE 2 PASS: causality, 100 windows, {checks} bit-identity checks");
}

#[test]
fn c03_weight_sharing_guard() {
    // the 1273 figure is the hand enumeration
    // 21*8 + 11*8 + 64 + 64 + (256+144+32) + (256+144+48) + 9 (e = 10);
    // an unshared decoder would count 4*d*d more
    let cfg = ModelConfig::new(10, 5, 8, 2).unwrap().with_ffn_dim(8);
    let counted = param_count(&cfg);
    assert_eq!(counted, 1273);
    let params: ParamSet<f64> = ParamSet::zeros(&cfg);
    assert_eq!(params.count(), 1273);
    let d = cfg.model_dim;
    let unshared = counted + 4 * d * d;
    assert_eq!(counted, unshared - 4 * d * d);

    // exactly one decoder attention weight set in the name inventory
    let mha_names: Vec<String> = params
        .named_tensors()
        .into_iter()
        .map(|(n, _, _)| n)
        .filter(|n| n.starts_with("decoder.0.mha."))
        .collect();
    assert_eq!(mha_names.len(), 4, "{mha_names:?}");

    // mutating any decoder attention tensor changes both attention stages'
    // outputs. Q/K changes show in the self-attention weights directly; V/O
    // changes alter the self-stage OUTPUT, which feeds the cross stage as
    // queries, so the cross weights shift; the final probabilities prove the
    // cross-stage output moved too.
    let probe_cfg = grad_check_config();
    let window = random_window(&probe_cfg, 42);
    let mut model: Model<f64> = Model::init(probe_cfg, 42).unwrap();
    let (base_probs, before) = model.forward(&window).unwrap();
    for pick in 0..4 {
        let mha = &mut model.params.decoder[0].mha;
        let tensor = match pick {
            0 => &mut mha.w_q,
            1 => &mut mha.w_k,
            2 => &mut mha.w_v,
            _ => &mut mha.w_o,
        };
        tensor[[0, 0]] += 0.25;
        let (probs, after) = model.forward(&window).unwrap();
        if pick < 2 {
            assert_ne!(
                before.attention[0].decoder_self, after.attention[0].decoder_self,
                "tensor {pick} did not reach the self stage"
            );
        }
        assert_ne!(
            before.attention[0].decoder_cross, after.attention[0].decoder_cross,
            "tensor {pick} did not reach the cross stage"
        );
        assert_ne!(base_probs, probs, "tensor {pick} had no downstream effect");
        let tensor = match pick {
            0 => &mut model.params.decoder[0].mha.w_q,
            1 => &mut model.params.decoder[0].mha.w_k,
            2 => &mut model.params.decoder[0].mha.w_v,
            _ => &mut model.params.decoder[0].mha.w_o,
        };
        tensor[[0, 0]] -= 0.25;
    }
    println!("ACCEPTANCE 3 PASS: param_count = 1273, sharing verified on all 4 tensors");
}

#[test]
fn c04_mask_correctness_on_export() {
    // 100-window export: no record with key_pos > query_pos, and the
    // weights per (window, block, stage, head, query) sum to 1 +- 1e-5
    let cfg = ModelConfig::new(9, 8, 16, 4).unwrap();
    let model: Model<f32> = Model::init(cfg.clone(), 99).unwrap();
    let windows: Vec<EncodedWindow> =
        (0..100).map(|i| random_window(&cfg, 9000 + i)).collect();
    let mut buf = Vec::new();
    export_attention(&model, &windows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();

    let mut sums: std::collections::HashMap<(usize, usize, String, usize, usize), f64> =
        std::collections::HashMap::new();
    let mut records = 0usize;
    for line in text.lines().skip(1) {
        let p: Vec<&str> = line.split(',').collect();
        let (w, b, stage, h, q, k): (usize, usize, String, usize, usize, usize) = (
            p[0].parse().unwrap(),
            p[1].parse().unwrap(),
            p[2].to_string(),
            p[3].parse().unwrap(),
            p[4].parse().unwrap(),
            p[5].parse().unwrap(),
        );
        let weight: f64 = p[6].parse().unwrap();
        assert!(k <= q, "masked record exported: {line}");
        *sums.entry((w, b, stage, h, q)).or_insert(0.0) += weight;
        records += 1;
    }
    assert!(!sums.is_empty());
    for (key, sum) in &sums {
        assert!((sum - 1.0).abs() < 1e-5, "row {key:?} sums to {sum}");
    }
    println!(
        "ACCEPTANCE 4 PASS: {records} exported weights, {} rows all sum to 1 +- 1e-5",
        sums.len()
    );
}

#[test]
fn c05_overfit_capacity() {
    // 32 users, e=10, length 21 (one full window at k=20), d=24, h=4,
    // batch 32, <= 500 epochs: train BCE < 0.1 and train AUC > 0.95
    let generator = SyntheticSkillModel::uniform(REF_BKT, 5, 2);
    let data = generate_synthetic(&generator, 32, 21, 2024).unwrap();
    let e = data.vocabulary.exercise_count();
    assert_eq!(e, 10);
    let windows = window_dataset(&data.sequences, 20, e).unwrap();
    assert_eq!(windows.len(), 32);
    assert!(windows.iter().all(|w| w.valid_len() == 20));

    let model_cfg = ModelConfig::new(10, 20, 24, 4).unwrap();
    let train_cfg = TrainConfig {
        batch_size: 32,
        epochs: 500,
        seed: 7,
        val_fraction: 0.0,
        ..TrainConfig::default()
    };
    let fitres = fit(&windows, &[], &model_cfg, &train_cfg, |_| {}).unwrap();
    let report = evaluate(&fitres.model, &windows).unwrap();
    assert!(
        report.mean_bce < 0.1,
        "train BCE {} not < 0.1",
        report.mean_bce
    );
    assert!(report.auc > 0.95, "train AUC {} not > 0.95", report.auc);
    println!(
        "ACCEPTANCE 5 PASS: overfit train BCE {:.4} < 0.1, train AUC {:.4} > 0.95 ({} epochs)",
        report.mean_bce,
        report.auc,
        fitres.reports.len()
    );
}

#[test]
fn c06_learning_on_structure() {
    // 10 skills x 2 exercises, reference dynamics, 500 users x length 50,
    // 80/20 user split: trained test AUC >= oracle AUC - 0.03 and > 0.55
    let generator = SyntheticSkillModel::uniform(REF_BKT, 10, 2);
    let data = generate_synthetic(&generator, 500, 50, 31).unwrap();
    let e = data.vocabulary.exercise_count();
    assert_eq!(e, 20);

    // pair each sequence with its oracle probabilities before splitting
    let mut indexed: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (i, s) in data.sequences.iter().enumerate() {
        indexed.insert(s.user_id.clone(), i);
    }
    let (train_users, test_users) = split_dataset(data.sequences.clone(), 0.8, 555).unwrap();
    assert_eq!(train_users.len(), 400);
    assert_eq!(test_users.len(), 100);

    // exact Bayes-filter oracle on the same positions the model is scored on
    // (every interaction except each user's first)
    let mut oracle_scores = Vec::new();
    let mut oracle_labels = Vec::new();
    for seq in &test_users {
        let i = indexed[&seq.user_id];
        for t in 1..seq.interactions.len() {
            oracle_scores.push(data.oracle_probs[i][t]);
            oracle_labels.push(seq.interactions[t].correct);
        }
    }
    let oracle = oracle_auc(&oracle_scores, &oracle_labels).unwrap();

    let (train_users, val_users) = split_dataset(train_users, 0.9, 556).unwrap();
    let k = 50usize;
    let train_windows = window_dataset(&train_users, k, e).unwrap();
    let val_windows = window_dataset(&val_users, k, e).unwrap();
    let test_windows = window_dataset(&test_users, k, e).unwrap();

    let model_cfg = ModelConfig::new(e as usize, k, 24, 4).unwrap();
    let train_cfg = TrainConfig {
        batch_size: 128,
        epochs: 60,
        seed: 17,
        ..TrainConfig::default()
    };
    let fitres = fit(&train_windows, &val_windows, &model_cfg, &train_cfg, |_| {}).unwrap();
    let report = evaluate(&fitres.model, &test_windows).unwrap();

    assert!(
        report.auc >= oracle - 0.03,
        "test AUC {:.4} below oracle {:.4} - 0.03",
        report.auc,
        oracle
    );
    assert!(report.auc > 0.55, "test AUC {:.4} not > 0.55", report.auc);
    println!(
        "ACCEPTANCE 6 PASS: test AUC {:.4} vs Bayes oracle {:.4} (gap {:+.4}, allowed -0.03), best epoch {}",
        report.auc,
        oracle,
        report.auc - oracle,
        fitres.best_epoch
    );
}

#[test]
fn c07_optimizer_and_schedule_exactness() {
    // noam closed form at steps {1, 60, 1e4}, d = 64, warmup = 60, to 1e-12
    let cases = [
        (1usize, 0.125 * 60f64.powf(-1.5)),
        (60, 64f64.powf(-0.5) * 60f64.powf(-0.5)),
        (10_000, 0.125 * 0.01),
    ];
    for (step, expect) in cases {
        let got = noam_lr(step, 64, 60).unwrap();
        assert!(
            (got - expect).abs() < 1e-12,
            "step {step}: {got} vs {expect}"
        );
    }
    assert!((noam_lr(60, 64, 60).unwrap() - 0.016137).abs() < 1e-6);

    // hand-computed scalar Adam step: theta 1.0 -> 1 - 0.1/(1 + 1e-8)
    let mc = ModelConfig::new(1, 1, 1, 1).unwrap();
    let tc = TrainConfig::default();
    let mut params: ParamSet<f64> = ParamSet::zeros(&mc);
    params.head_b[0] = 1.0;
    let mut grads: ParamSet<f64> = ParamSet::zeros(&mc);
    grads.head_b[0] = 1.0;
    let mut opt = OptimizerState::new(&mc, &tc);
    opt.step = 1;
    opt.apply_with_lr(&mut params, &grads, 0.1).unwrap();
    let expect = 1.0 - 0.1 / (1.0 + 1e-8);
    assert!(
        (params.head_b[0] - expect).abs() < 1e-12,
        "theta {} vs {expect}",
        params.head_b[0]
    );
    println!("ACCEPTANCE 7 PASS: Noam values and the hand Adam step match to 1e-12");
}

#[test]
fn c08_auc_oracle_equivalence() {
    // rank-sum AUC equals the O(n^2) pairwise count on 50 random instances
    // with ties, to 1e-12; the hand case scores 0.75
    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
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
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        num / den
    }

    let hand = auc(&[0.9, 0.8, 0.3, 0.1], &[1, 0, 1, 0]).unwrap();
    assert!((hand - 0.75).abs() < 1e-15);

    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = substream(seed, 8);
        let n = rng.random_range(2..60);
        // quantized scores force ties
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u32) as u8).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            let flip = rng.random_range(0..n);
            labels[flip] ^= 1;
        }
        let fast = auc(&scores, &labels).unwrap();
        let slow = pairwise(&scores, &labels);
        worst = worst.max((fast - slow).abs());
        assert!((fast - slow).abs() < 1e-12, "seed {seed}");
    }
    println!("ACCEPTANCE 8 PASS: 50 tie-bearing instances, worst |rank - pairwise| {worst:.2e}");
}

#[test]
fn c09_train_determinism() {
    // two identical `train` invocations produce byte-identical epoch logs
    // and checkpoints
    let bin = env!("CARGO_BIN_EXE_dsakt");
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();

    let status = Command::new(bin)
        .args(["gen", "--seed", "5", "--users", "24", "--len", "15"])
        .args(["--skills", "4", "--exercises-per-skill", "2"])
        .arg("--out")
        .arg(base.join("data"))
        .status()
        .unwrap();
    assert!(status.success());

    let train = |out: &std::path::Path| {
        let status = Command::new(bin)
            .args(["train", "--seed", "9", "--k", "10", "--d", "8", "--h", "2"])
            .args(["--batch-size", "8", "--epochs", "6"])
            .arg("--data")
            .arg(base.join("data/synthetic.csv"))
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    train(&base.join("run1"));
    train(&base.join("run2"));

    let log1 = std::fs::read(base.join("run1/epochs.jsonl")).unwrap();
    let log2 = std::fs::read(base.join("run2/epochs.jsonl")).unwrap();
    assert_eq!(log1, log2, "epoch logs differ");
    let ck1 = std::fs::read(base.join("run1/checkpoint.dsakt")).unwrap();
    let ck2 = std::fs::read(base.join("run2/checkpoint.dsakt")).unwrap();
    assert_eq!(ck1, ck2, "checkpoints differ");
    println!(
        "ACCEPTANCE 9 PASS: byte-identical epoch log ({} bytes) and checkpoint ({} bytes)",
        log1.len(),
        ck1.len()
    );
}

#[test]
fn c10_reference_results_statement() {
    // The published reference AUCs for this architecture (Pintia 3: 0.764 vs
    // 0.741 for the single-attention baseline; ASSIST09: 0.769) came from
    // private Pintia data and baseline implementations that are out of scope
    // here, so they are recorded as constants rather than reproduced at desk
    // scale. The optional extended run (ASSIST-2009, k=100, d=64, batch 128,
    // target test AUC >= 0.74) is supported by the CLI's assist adapter but
    // is not gating.
    const REFERENCE_AUC_PINTIA3: f64 = 0.764;
    const REFERENCE_AUC_PINTIA3_BASELINE: f64 = 0.741;
    const REFERENCE_AUC_ASSIST09: f64 = 0.769;
    const EXTENDED_TARGET_ASSIST09: f64 = 0.74;
    assert!(REFERENCE_AUC_PINTIA3 > REFERENCE_AUC_PINTIA3_BASELINE);
    assert!(EXTENDED_TARGET_ASSIST09 >= REFERENCE_AUC_ASSIST09 - 0.03);
    // the assist adapter named by the extended path must exist
    assert!(dsakt::data::LogFormat::by_name("assist").is_ok());
    println!(
        "ACCEPTANCE 10 PASS: reference AUCs recorded (Pintia3 {REFERENCE_AUC_PINTIA3}, \
         ASSIST09 {REFERENCE_AUC_ASSIST09}); desk-scale reproduction out of scope, \
         extended ASSIST path available but not gating"
    );
}
