//! Command-line front end. Every command is a pure function of its config
//! file, input files, and seed: rerunning with the same inputs yields
//! byte-identical artifacts. Exit codes: 0 success, 2 usage/config error,
//! 3 numeric failure, 4 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::{
    generate_synthetic, parse_interaction_log, parse_with_vocabulary, split_dataset,
    window_dataset, write_canonical, BktParams, EncodedWindow, Interaction, LogFormat,
    SyntheticSkillModel, UserSequence, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, export_attention, metrics_from_pool};
use crate::model::{load_checkpoint, save_checkpoint, Model, ModelConfig};
use crate::train::{fit, EpochReport, TrainConfig};

#[derive(Parser)]
#[command(
    name = "dsakt",
    version,
    about = "Knowledge tracing with an encoder-decoder self-attention model"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset plus a Bayes-oracle sidecar
    Gen(GenArgs),
    /// Train a model and write the best checkpoint plus an epoch log
    Train(TrainArgs),
    /// Evaluate a checkpoint (or an oracle sidecar) on a dataset
    Eval(EvalArgs),
    /// Predict the next-correctness probability for one student history
    Predict(PredictArgs),
    /// Export attention weights for visualization
    ExportAttention(ExportArgs),
}

/// Flat config file keys. Command-line flags override file values.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub adapter: Option<String>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub val_fraction: Option<f64>,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub h: Option<usize>,
    pub d_ff: Option<usize>,
    pub blocks: Option<usize>,
    pub dropout: Option<f64>,
    pub scale_full_d: Option<bool>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub warmup: Option<usize>,
    pub users: Option<usize>,
    pub len: Option<usize>,
    pub skills: Option<usize>,
    pub exercises_per_skill: Option<usize>,
    pub p_init: Option<f64>,
    pub p_learn: Option<f64>,
    pub p_slip: Option<f64>,
    pub p_guess: Option<f64>,
    pub split: Option<String>,
    pub oracle: Option<PathBuf>,
    pub limit: Option<usize>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::RunConfig(format!("config file {}: {e}", p.display())))
            }
        }
    }
}

fn merge<T: Clone>(file: &Option<T>, flag: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

fn require<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::RunConfig(format!("missing required option --{name}")))
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file with flat keys; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for all artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed; mandatory wherever randomness or splitting is involved
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of synthetic students
    #[arg(long)]
    users: Option<usize>,
    /// Interactions per student
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    skills: Option<usize>,
    #[arg(long)]
    exercises_per_skill: Option<usize>,
    #[arg(long)]
    p_init: Option<f64>,
    #[arg(long)]
    p_learn: Option<f64>,
    #[arg(long)]
    p_slip: Option<f64>,
    #[arg(long)]
    p_guess: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Interaction log to train on
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset adapter: canonical | assist
    #[arg(long)]
    adapter: Option<String>,
    /// Window length k; mandatory, no default
    #[arg(long)]
    k: Option<usize>,
    /// Latent dimension d
    #[arg(long)]
    d: Option<usize>,
    /// Attention head count
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    d_ff: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    scale_full_d: Option<bool>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Train/test split ratio at user granularity
    #[arg(long)]
    ratio: Option<f64>,
    /// Fraction of training users held out for best-epoch selection
    #[arg(long)]
    val_fraction: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Score the Bayes-oracle sidecar instead of a checkpoint
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Which side of the user split to score: train | test | all
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated history of exercise_id:correct pairs, oldest first
    #[arg(long)]
    history: Option<String>,
    /// Exercise id to predict
    #[arg(long)]
    next: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Export at most this many windows
    #[arg(long)]
    limit: Option<usize>,
}

/// Entry point used by the binary. Parses argv and executes one command.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::ExportAttention(args) => cmd_export_attention(args),
    }
}

/// Map an error onto the documented exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::CheckpointMagic(_) | Error::CheckpointShape { .. }
        | Error::CheckpointTruncated(_) => 4,
        Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::ZeroStep
        | Error::SingleClass | Error::TooFewScores(_) | Error::ShapeMismatch { .. }
        | Error::FullyMaskedRow { .. } | Error::NoValidPositions
        | Error::TokenOutOfRange { .. } | Error::ExerciseOutOfRange { .. } => 3,
        _ => 2,
    }
}

fn out_dir(common: &CommonArgs, file_cfg: &RunConfig) -> Result<PathBuf> {
    let dir = require(merge(&file_cfg.out, &common.out), "out")?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let file_cfg = RunConfig::load(args.common.config.as_deref())?;
    let seed = require(merge(&file_cfg.seed, &args.common.seed), "seed")?;
    let users = require(merge(&file_cfg.users, &args.users), "users")?;
    let len = require(merge(&file_cfg.len, &args.len), "len")?;
    let dir = out_dir(&args.common, &file_cfg)?;

    let params = BktParams {
        p_init: merge(&file_cfg.p_init, &args.p_init).unwrap_or(0.4),
        p_learn: merge(&file_cfg.p_learn, &args.p_learn).unwrap_or(0.3),
        p_slip: merge(&file_cfg.p_slip, &args.p_slip).unwrap_or(0.1),
        p_guess: merge(&file_cfg.p_guess, &args.p_guess).unwrap_or(0.2),
    };
    let skills = merge(&file_cfg.skills, &args.skills).unwrap_or(10);
    let per_skill = merge(&file_cfg.exercises_per_skill, &args.exercises_per_skill).unwrap_or(2);
    let model = SyntheticSkillModel::uniform(params, skills, per_skill);
    let data = generate_synthetic(&model, users, len, seed)?;

    let csv_path = dir.join("synthetic.csv");
    let mut csv = fs::File::create(&csv_path)?;
    write_canonical(&mut csv, &data.sequences, &data.vocabulary)?;

    let oracle_path = dir.join("synthetic.oracle.txt");
    let mut sidecar = fs::File::create(&oracle_path)?;
    for probs in &data.oracle_probs {
        for p in probs {
            writeln!(sidecar, "{p}")?;
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "csv": csv_path,
            "oracle": oracle_path,
            "users": users,
            "exercises": data.vocabulary.exercise_count(),
        })
    );
    Ok(())
}

fn load_format(adapter: Option<String>) -> Result<LogFormat> {
    LogFormat::by_name(adapter.as_deref().unwrap_or("canonical"))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file_cfg = RunConfig::load(args.common.config.as_deref())?;
    let seed = require(merge(&file_cfg.seed, &args.common.seed), "seed")?;
    let k = require(merge(&file_cfg.k, &args.k), "k")?;
    let data_path = require(merge(&file_cfg.data, &args.data), "data")?;
    let dir = out_dir(&args.common, &file_cfg)?;
    let format = load_format(merge(&file_cfg.adapter, &args.adapter))?;

    let report = parse_interaction_log(fs::File::open(&data_path)?, &format)?;
    let e = report.vocabulary.exercise_count() as usize;

    let d = merge(&file_cfg.d, &args.d).unwrap_or(64);
    let mut model_cfg = ModelConfig::new(e, k, d, merge(&file_cfg.h, &args.h).unwrap_or(4))?;
    model_cfg.ffn_dim = merge(&file_cfg.d_ff, &args.d_ff).unwrap_or(d);
    model_cfg.block_count = merge(&file_cfg.blocks, &args.blocks).unwrap_or(1);
    model_cfg.dropout_rate = merge(&file_cfg.dropout, &args.dropout).unwrap_or(0.0);
    model_cfg.scale_full_d = merge(&file_cfg.scale_full_d, &args.scale_full_d).unwrap_or(false);
    model_cfg.validate()?;

    let ratio = merge(&file_cfg.ratio, &args.ratio).unwrap_or(0.8);
    let val_fraction = merge(&file_cfg.val_fraction, &args.val_fraction).unwrap_or(0.1);
    let train_cfg = TrainConfig {
        batch_size: merge(&file_cfg.batch_size, &args.batch_size).unwrap_or(128),
        epochs: merge(&file_cfg.epochs, &args.epochs).unwrap_or(100),
        seed,
        val_fraction,
        warmup_steps: merge(&file_cfg.warmup, &args.warmup).unwrap_or(60),
        ..TrainConfig::default()
    };

    // user-level split; the test side never guides training or selection.
    // ratio >= 1 keeps every user for training (overfit experiments).
    let (train_users, _test_users) = if ratio >= 1.0 {
        (report.sequences, Vec::new())
    } else {
        split_dataset(report.sequences, ratio, seed)?
    };
    // carve validation users from the training side with a derived seed
    let (train_users, val_users) = if val_fraction > 0.0 && train_users.len() >= 2 {
        split_dataset(
            train_users,
            1.0 - val_fraction,
            seed ^ 0x9e37_79b9_7f4a_7c15,
        )?
    } else {
        (train_users, Vec::new())
    };
    let train_windows = window_dataset(&train_users, k, e as u32)?;
    let val_windows = window_dataset(&val_users, k, e as u32)?;

    let log_path = dir.join("epochs.jsonl");
    let mut log = fs::File::create(&log_path)?;
    let fitres = fit(&train_windows, &val_windows, &model_cfg, &train_cfg, |r| {
        // stdout carries wall-clock seconds; the log file stays reproducible
        println!("{}", serde_json::to_string(r).expect("serializable report"));
        let line = reproducible_line(r);
        writeln!(log, "{line}").expect("epoch log write");
    })?;

    let ckpt_path = dir.join("checkpoint.dsakt");
    save_checkpoint(&ckpt_path, &model_cfg, &fitres.model.params, &report.vocabulary)?;
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": ckpt_path,
            "epoch_log": log_path,
            "best_epoch": fitres.best_epoch,
            "train_windows": train_windows.len(),
            "val_windows": val_windows.len(),
        })
    );
    Ok(())
}

/// Epoch log line without the wall-clock field, so reruns are byte-identical.
fn reproducible_line(r: &EpochReport) -> String {
    serde_json::json!({
        "epoch": r.epoch,
        "loss": r.loss,
        "val_auc": r.val_auc,
        "lr": r.lr,
    })
    .to_string()
}

enum SplitSide {
    Train,
    Test,
    All,
}

fn parse_split(split: Option<String>) -> Result<SplitSide> {
    match split.as_deref() {
        None | Some("all") => Ok(SplitSide::All),
        Some("train") => Ok(SplitSide::Train),
        Some("test") => Ok(SplitSide::Test),
        Some(other) => Err(Error::RunConfig(format!(
            "--split must be train, test or all, got `{other}`"
        ))),
    }
}

fn select_side(
    sequences: Vec<UserSequence>,
    side: &SplitSide,
    ratio: f64,
    seed: Option<u64>,
) -> Result<Vec<UserSequence>> {
    match side {
        SplitSide::All => Ok(sequences),
        _ => {
            let seed = require(seed, "seed")?;
            let (train, test) = split_dataset(sequences, ratio, seed)?;
            Ok(match side {
                SplitSide::Train => train,
                _ => test,
            })
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let file_cfg = RunConfig::load(args.common.config.as_deref())?;
    let data_path = require(merge(&file_cfg.data, &args.data), "data")?;
    let format = load_format(merge(&file_cfg.adapter, &args.adapter))?;
    let side = parse_split(merge(&file_cfg.split, &args.split))?;
    let ratio = merge(&file_cfg.ratio, &args.ratio).unwrap_or(0.8);
    let seed = merge(&file_cfg.seed, &args.common.seed);
    let checkpoint = merge(&file_cfg.checkpoint, &args.checkpoint);
    let oracle = merge(&file_cfg.oracle, &args.oracle);

    let report = match (checkpoint, oracle) {
        (Some(ckpt), None) => {
            let (cfg, params, vocabulary) = load_checkpoint(&ckpt)?;
            let ingest =
                parse_with_vocabulary(fs::File::open(&data_path)?, &format, &vocabulary)?;
            let side_seqs = select_side(ingest.sequences, &side, ratio, seed)?;
            let windows = window_dataset(
                &side_seqs,
                cfg.window_len,
                cfg.exercise_count as u32,
            )?;
            let model: Model<f32> = Model::new(cfg, params)?;
            evaluate(&model, &windows)?
        }
        (None, Some(sidecar)) => {
            let ingest = parse_interaction_log(fs::File::open(&data_path)?, &format)?;
            let probs = read_oracle_sidecar(&sidecar, &ingest.sequences)?;
            let keep: std::collections::BTreeSet<String> =
                select_side(ingest.sequences.clone(), &side, ratio, seed)?
                    .into_iter()
                    .map(|s| s.user_id)
                    .collect();
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            let mut offset = 0usize;
            for seq in &ingest.sequences {
                let n = seq.interactions.len();
                if keep.contains(&seq.user_id) {
                    // the first interaction of a user is never a target
                    for t in 1..n {
                        scores.push(probs[offset + t]);
                        labels.push(seq.interactions[t].correct);
                    }
                }
                offset += n;
            }
            metrics_from_pool(&scores, &labels)?
        }
        (Some(_), Some(_)) => {
            return Err(Error::RunConfig(
                "--checkpoint and --oracle are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(Error::RunConfig(
                "eval needs --checkpoint or --oracle".into(),
            ))
        }
    };

    let json = serde_json::to_string(&report)?;
    println!("{json}");
    if let Some(dir) = merge(&file_cfg.out, &args.common.out) {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("eval.json"), format!("{json}\n"))?;
    }
    Ok(())
}

/// Sidecar alignment assumes the canonical layout written by `gen`: one line
/// per interaction, users contiguous, per-user rows in order.
fn read_oracle_sidecar(path: &Path, sequences: &[UserSequence]) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let probs: std::result::Result<Vec<f64>, _> =
        text.lines().map(|l| l.trim().parse::<f64>()).collect();
    let probs =
        probs.map_err(|e| Error::RunConfig(format!("oracle sidecar {}: {e}", path.display())))?;
    let total: usize = sequences.iter().map(|s| s.interactions.len()).sum();
    if probs.len() != total {
        return Err(Error::RunConfig(format!(
            "oracle sidecar has {} probabilities, dataset has {} interactions",
            probs.len(),
            total
        )));
    }
    Ok(probs)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let file_cfg = RunConfig::load(args.common.config.as_deref())?;
    let ckpt = require(merge(&file_cfg.checkpoint, &args.checkpoint), "checkpoint")?;
    let history_raw = require(args.history, "history")?;
    let next_id = require(args.next, "next")?;

    let (cfg, params, vocabulary) = load_checkpoint(&ckpt)?;
    let history = parse_history(&history_raw, &vocabulary)?;
    if history.is_empty() {
        return Err(Error::RunConfig("history must not be empty".into()));
    }
    let next = vocabulary
        .index_of(&next_id)
        .ok_or_else(|| Error::UnknownExercise(next_id.clone()))?;

    let model: Model<f32> = Model::new(cfg, params)?;
    let prob = predict_next(&model, &history, next)?;
    println!("{}", serde_json::json!({ "prob": prob }));
    Ok(())
}

fn parse_history(raw: &str, vocabulary: &Vocabulary) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for item in raw.split(',').filter(|s| !s.trim().is_empty()) {
        let (id, correct) = item.rsplit_once(':').ok_or_else(|| {
            Error::RunConfig(format!("history item `{item}` is not exercise_id:correct"))
        })?;
        let correct = match correct.trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::RunConfig(format!(
                    "history correctness must be 0 or 1, got `{other}`"
                )))
            }
        };
        let exercise = vocabulary
            .index_of(id.trim())
            .ok_or_else(|| Error::UnknownExercise(id.trim().to_string()))?;
        out.push(Interaction { exercise, correct });
    }
    Ok(out)
}

/// Right-pad the (possibly truncated) history into one window and return the
/// probability at the last valid position, where the query is `next`.
pub fn predict_next(model: &Model<f32>, history: &[Interaction], next: u32) -> Result<f64> {
    let k = model.config.window_len;
    let e = model.config.exercise_count as u32;
    if history.is_empty() {
        return Err(Error::RunConfig("history must not be empty".into()));
    }
    let recent: &[Interaction] = if history.len() > k {
        &history[history.len() - k..]
    } else {
        history
    };
    let m = recent.len();
    let mut w = EncodedWindow {
        interaction_tokens: vec![0; k],
        query_tokens: vec![0; k],
        targets: vec![0; k],
        valid_mask: vec![0; k],
    };
    for (t, it) in recent.iter().enumerate() {
        w.interaction_tokens[t] = crate::data::encode_interaction(it.exercise, it.correct, e)?;
        w.valid_mask[t] = 1;
        if t + 1 < m {
            w.query_tokens[t] = recent[t + 1].exercise;
        }
    }
    w.query_tokens[m - 1] = next;
    let probs = model.probabilities(&w)?;
    Ok(probs[m - 1] as f64)
}

fn cmd_export_attention(args: ExportArgs) -> Result<()> {
    let file_cfg = RunConfig::load(args.common.config.as_deref())?;
    let ckpt = require(merge(&file_cfg.checkpoint, &args.checkpoint), "checkpoint")?;
    let data_path = require(merge(&file_cfg.data, &args.data), "data")?;
    let dir = out_dir(&args.common, &file_cfg)?;
    let format = load_format(merge(&file_cfg.adapter, &args.adapter))?;

    let (cfg, params, vocabulary) = load_checkpoint(&ckpt)?;
    let ingest = parse_with_vocabulary(fs::File::open(&data_path)?, &format, &vocabulary)?;
    let mut windows = window_dataset(
        &ingest.sequences,
        cfg.window_len,
        cfg.exercise_count as u32,
    )?;
    if let Some(limit) = merge(&file_cfg.limit, &args.limit) {
        windows.truncate(limit);
    }
    let model: Model<f32> = Model::new(cfg, params)?;
    let path = dir.join("attention.csv");
    let file = fs::File::create(&path)?;
    export_attention(&model, &windows, std::io::BufWriter::new(file))?;
    println!(
        "{}",
        serde_json::json!({ "attention": path, "windows": windows.len() })
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_parsing_handles_ids_and_flags() {
        let vocab = Vocabulary::from_ids(["alg".to_string(), "geo".to_string()]);
        let h = parse_history("alg:1,geo:0,alg:0", &vocab).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(h[0], Interaction { exercise: 1, correct: 1 });
        assert_eq!(h[1], Interaction { exercise: 2, correct: 0 });
        assert!(matches!(
            parse_history("nope:1", &vocab),
            Err(Error::UnknownExercise(ref id)) if id == "nope"
        ));
        assert!(parse_history("alg:2", &vocab).is_err());
        assert!(parse_history("alg", &vocab).is_err());
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(&Error::RunConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::EmptyInput), 2);
        assert_eq!(exit_code(&Error::NonFiniteLoss { epoch: 1, batch: 0 }), 3);
        assert_eq!(exit_code(&Error::SingleClass), 3);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::other("x"))),
            4
        );
        assert_eq!(exit_code(&Error::CheckpointTruncated("x".into())), 4);
    }

    #[test]
    fn predict_is_invariant_to_window_padding_amount() {
        // same history, same model: the padded tail length cannot matter
        let cfg = ModelConfig::new(6, 12, 8, 2).unwrap();
        let model: Model<f32> = Model::init(cfg, 3).unwrap();
        let history = vec![
            Interaction { exercise: 2, correct: 1 },
            Interaction { exercise: 4, correct: 0 },
            Interaction { exercise: 1, correct: 1 },
        ];
        let a = predict_next(&model, &history, 5).unwrap();
        let b = predict_next(&model, &history, 5).unwrap();
        assert_eq!(a, b);
        // longer history truncates to the window length without erroring
        let long: Vec<Interaction> = (0..30)
            .map(|i| Interaction { exercise: (i % 6) + 1, correct: (i % 2) as u8 })
            .collect();
        assert!(predict_next(&model, &long, 3).is_ok());
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("sed"));
    }
}
