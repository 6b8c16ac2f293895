//! Optimization: Adam under the Noam learning-rate schedule, deterministic
//! batching, and the epoch loop with best-validation checkpoint selection.

use std::time::Instant;

use ndarray::NdFloat;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::EncodedWindow;
use crate::error::{Error, Result};
use crate::eval;
use crate::kernel::ParamTensors;
use crate::model::{Model, ModelConfig, ParamSet};

/// Epoch shuffles draw from stream EPOCH_STREAM_BASE + epoch, away from the
/// streams used by splitting (0) and generation (1..=users).
const EPOCH_STREAM_BASE: u64 = 1 << 62;

/// Gradients inside a batch are accumulated serially within fixed-size
/// chunks and the chunks folded in order, so the result does not depend on
/// how many worker threads run.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of training users carved out for checkpoint selection.
    pub val_fraction: f64,
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 100,
            seed: 0,
            val_fraction: 0.1,
            warmup_steps: 60,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

/// Noam schedule: lr = d^-0.5 * min(step^-0.5, step * warmup^-1.5).
/// Rises linearly to the peak at step = warmup, then decays as step^-0.5.
pub fn noam_lr(step: usize, model_dim: usize, warmup_steps: usize) -> Result<f64> {
    if step == 0 {
        return Err(Error::ZeroStep);
    }
    let step = step as f64;
    let warmup = warmup_steps as f64;
    let scale = (model_dim as f64).powf(-0.5);
    Ok(scale * (step.powf(-0.5)).min(step * warmup.powf(-1.5)))
}

/// Adam moments plus the schedule's step counter. Update arithmetic runs in
/// f64 regardless of the storage precision.
#[derive(Debug, Clone)]
pub struct OptimizerState<F: NdFloat> {
    pub step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub warmup_steps: usize,
    pub model_dim: usize,
    m: ParamSet<F>,
    v: ParamSet<F>,
}

impl<F: NdFloat> OptimizerState<F> {
    pub fn new(model_cfg: &ModelConfig, train_cfg: &TrainConfig) -> Self {
        Self {
            step: 0,
            beta1: train_cfg.beta1,
            beta2: train_cfg.beta2,
            eps_adam: train_cfg.eps_adam,
            warmup_steps: train_cfg.warmup_steps,
            model_dim: model_cfg.model_dim,
            m: ParamSet::zeros(model_cfg),
            v: ParamSet::zeros(model_cfg),
        }
    }

    /// One scheduled optimizer step: advance the counter, take the Noam rate
    /// for the new step, apply the update.
    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &ParamSet<F>) -> Result<f64> {
        self.step += 1;
        let lr = noam_lr(self.step, self.model_dim, self.warmup_steps)?;
        self.apply_with_lr(params, grads, lr)?;
        Ok(lr)
    }

    /// Bias-corrected Adam update with an explicit learning rate. `self.step`
    /// must already count this batch.
    pub fn apply_with_lr(
        &mut self,
        params: &mut ParamSet<F>,
        grads: &ParamSet<F>,
        lr: f64,
    ) -> Result<()> {
        let (b1, b2) = (self.beta1, self.beta2);
        let bias1 = 1.0 - b1.powi(self.step as i32);
        let bias2 = 1.0 - b2.powi(self.step as i32);
        let mut p = params.named_tensors_mut();
        let g = grads.named_tensors();
        let mut m = self.m.named_tensors_mut();
        let mut v = self.v.named_tensors_mut();
        for i in 0..p.len() {
            let (name, pv) = &mut p[i];
            let gv = g[i].2;
            let mv = &mut m[i].1;
            let vv = &mut v[i].1;
            for j in 0..pv.len() {
                let grad = gv[j].to_f64().unwrap();
                if !grad.is_finite() {
                    return Err(Error::NonFinite(name.clone()));
                }
                let m_new = b1 * mv[j].to_f64().unwrap() + (1.0 - b1) * grad;
                let v_new = b2 * vv[j].to_f64().unwrap() + (1.0 - b2) * grad * grad;
                mv[j] = F::from(m_new).unwrap();
                vv[j] = F::from(v_new).unwrap();
                let m_hat = m_new / bias1;
                let v_hat = v_new / bias2;
                let theta = pv[j].to_f64().unwrap() - lr * m_hat / (v_hat.sqrt() + self.eps_adam);
                pv[j] = F::from(theta).unwrap();
            }
        }
        Ok(())
    }
}

/// Deterministic batch plan for one epoch: shuffle window indices keyed by
/// (seed, epoch), cut into `batch_size` chunks, keep the final short batch.
pub fn make_batches(
    n_windows: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1);
    let mut order: Vec<usize> = (0..n_windows).collect();
    order.shuffle(&mut crate::data::substream(
        seed,
        EPOCH_STREAM_BASE + epoch as u64,
    ));
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

fn dropout_rng(seed: u64, step: usize, slot: usize) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&u64::MAX.to_le_bytes()); // dropout tag
    key[16..24].copy_from_slice(&(step as u64).to_le_bytes());
    key[24..32].copy_from_slice(&(slot as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Mean loss and mean gradient over the windows named by `batch`. Chunks run
/// in parallel; accumulation order is fixed by the chunking, not by thread
/// scheduling.
pub fn batch_loss_and_grad(
    model: &Model<f32>,
    windows: &[EncodedWindow],
    batch: &[usize],
    dropout_seed: Option<(u64, usize)>,
) -> Result<(f64, ParamSet<f32>)> {
    let chunk_results: Vec<Result<(f64, ParamSet<f32>)>> = batch
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(chunk_ix, chunk)| {
            let mut grads = ParamSet::zeros(&model.config);
            let mut loss_sum = 0.0f64;
            for (j, &wi) in chunk.iter().enumerate() {
                let slot = chunk_ix * GRAD_CHUNK + j;
                let mut rng = dropout_seed.map(|(seed, step)| dropout_rng(seed, step, slot));
                let loss: f32 =
                    model.loss_and_grad(&windows[wi], &mut grads, rng.as_mut())?;
                loss_sum += loss as f64;
            }
            Ok((loss_sum, grads))
        })
        .collect();

    let mut total = ParamSet::zeros(&model.config);
    let mut loss_sum = 0.0f64;
    for r in chunk_results {
        let (l, g) = r?;
        loss_sum += l;
        total.add_scaled(&g, 1.0);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n as f32);
    Ok((loss_sum / n, total))
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub val_auc: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct FitResult {
    pub model: Model<f32>,
    pub reports: Vec<EpochReport>,
    /// 1-based epoch whose parameters ended up in `model`.
    pub best_epoch: usize,
}

/// Train on `train_windows`, evaluating validation AUC each epoch and
/// returning the parameters of the best-validation epoch (ties go to the
/// earlier epoch). With an empty validation set the final epoch wins.
/// Aborts with a diagnostic if the loss leaves the reals.
pub fn fit(
    train_windows: &[EncodedWindow],
    val_windows: &[EncodedWindow],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<FitResult> {
    if train_windows.is_empty() {
        return Err(Error::RunConfig("training set has no windows".into()));
    }
    let mut model: Model<f32> = Model::init(model_cfg.clone(), train_cfg.seed)?;
    let mut opt = OptimizerState::<f32>::new(model_cfg, train_cfg);
    let dropout = model_cfg.dropout_rate > 0.0;

    let mut reports = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, usize, ParamSet<f32>)> = None;
    let mut lr = 0.0;
    for epoch in 1..=train_cfg.epochs {
        let started = Instant::now();
        let batches = make_batches(
            train_windows.len(),
            train_cfg.batch_size,
            train_cfg.seed,
            epoch,
        );
        let mut loss_sum = 0.0f64;
        let mut window_count = 0usize;
        for (bi, batch) in batches.iter().enumerate() {
            let dropout_seed = dropout.then_some((train_cfg.seed, opt.step + 1));
            let (loss, grads) =
                batch_loss_and_grad(&model, train_windows, batch, dropout_seed)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            lr = opt.step(&mut model.params, &grads)?;
            loss_sum += loss * batch.len() as f64;
            window_count += batch.len();
        }
        let train_loss = loss_sum / window_count as f64;

        let val_auc = if val_windows.is_empty() {
            None
        } else {
            let (scores, labels) = eval::pool_predictions(&model, val_windows)?;
            Some(eval::auc(&scores, &labels)?)
        };
        if let Some(auc) = val_auc {
            let better = match &best {
                None => true,
                Some((best_auc, _, _)) => auc > *best_auc,
            };
            if better {
                best = Some((auc, epoch, model.params.clone()));
            }
        }

        let report = EpochReport {
            epoch,
            loss: train_loss,
            val_auc,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&report);
        reports.push(report);
    }

    let (best_epoch, params) = match best {
        Some((_, epoch, params)) => (epoch, params),
        None => (train_cfg.epochs, model.params.clone()),
    };
    let model = Model::new(model_cfg.clone(), params)?;
    Ok(FitResult {
        model,
        reports,
        best_epoch,
    })
}
