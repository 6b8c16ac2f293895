//! Learnable tensor inventory. The decoder block deliberately stores a
//! single attention weight set: the same tensors serve the self-attention
//! and the cross-attention application, so their gradients accumulate from
//! both uses.

use ndarray::{Array1, Array2, NdFloat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::kernel::ParamTensors;

use super::config::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct MhaParams<F> {
    pub w_q: Array2<F>,
    pub w_k: Array2<F>,
    pub w_v: Array2<F>,
    pub w_o: Array2<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F> {
    pub mha: MhaParams<F>,
    pub ffn: FfnParams<F>,
    pub norm_attn: NormParams<F>,
    pub norm_ffn: NormParams<F>,
}

/// One decoder block: ONE attention weight set (used twice), one FFN, and
/// three layer norms.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<F> {
    pub mha: MhaParams<F>,
    pub ffn: FfnParams<F>,
    pub norm_self: NormParams<F>,
    pub norm_cross: NormParams<F>,
    pub norm_ffn: NormParams<F>,
}

/// Every learnable tensor of the network. Row 0 of both embedding tables is
/// the padding slot; it is trainable like any other row but its output is
/// never scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F> {
    pub interaction_embedding: Array2<F>, // [2e+1, d]
    pub exercise_embedding: Array2<F>,    // [e+1, d]
    pub interaction_proj: Array2<F>,      // [d, d]
    pub exercise_proj: Array2<F>,         // [d, d]
    pub encoder: Vec<EncoderParams<F>>,
    pub decoder: Vec<DecoderParams<F>>,
    pub head_w: Array2<F>, // [d, 1]
    pub head_b: Array1<F>, // [1]
}

impl<F: NdFloat> MhaParams<F> {
    fn zeros(d: usize) -> Self {
        Self {
            w_q: Array2::zeros((d, d)),
            w_k: Array2::zeros((d, d)),
            w_v: Array2::zeros((d, d)),
            w_o: Array2::zeros((d, d)),
        }
    }
}

impl<F: NdFloat> FfnParams<F> {
    fn zeros(d: usize, d_ff: usize) -> Self {
        Self {
            w1: Array2::zeros((d, d_ff)),
            b1: Array1::zeros(d_ff),
            w2: Array2::zeros((d_ff, d)),
            b2: Array1::zeros(d),
        }
    }
}

impl<F: NdFloat> NormParams<F> {
    fn zeros(d: usize) -> Self {
        Self {
            gamma: Array1::zeros(d),
            beta: Array1::zeros(d),
        }
    }

    fn identity(d: usize) -> Self {
        Self {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
        }
    }
}

impl<F: NdFloat> ParamSet<F> {
    /// All-zero tensors; the shape template for gradients and moments.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (e, d, d_ff) = (cfg.exercise_count, cfg.model_dim, cfg.ffn_dim);
        Self {
            interaction_embedding: Array2::zeros((2 * e + 1, d)),
            exercise_embedding: Array2::zeros((e + 1, d)),
            interaction_proj: Array2::zeros((d, d)),
            exercise_proj: Array2::zeros((d, d)),
            encoder: (0..cfg.block_count)
                .map(|_| EncoderParams {
                    mha: MhaParams::zeros(d),
                    ffn: FfnParams::zeros(d, d_ff),
                    norm_attn: NormParams::zeros(d),
                    norm_ffn: NormParams::zeros(d),
                })
                .collect(),
            decoder: (0..cfg.block_count)
                .map(|_| DecoderParams {
                    mha: MhaParams::zeros(d),
                    ffn: FfnParams::zeros(d, d_ff),
                    norm_self: NormParams::zeros(d),
                    norm_cross: NormParams::zeros(d),
                    norm_ffn: NormParams::zeros(d),
                })
                .collect(),
            head_w: Array2::zeros((d, 1)),
            head_b: Array1::zeros(1),
        }
    }

    /// Seeded initialization: embeddings ~ Normal(0, d^-1/2), projection and
    /// FFN matrices ~ Uniform(+-sqrt(6/(n_in+n_out))), biases zero, layer
    /// norm at identity.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.model_dim;
        let mut p = Self::zeros(cfg);

        let emb_std = 1.0 / (d as f64).sqrt();
        let normal = Normal::new(0.0, emb_std).unwrap();
        let mut fill_normal = |a: &mut Array2<F>| {
            for v in a.iter_mut() {
                *v = F::from(normal.sample(&mut rng)).unwrap();
            }
        };
        fill_normal(&mut p.interaction_embedding);
        fill_normal(&mut p.exercise_embedding);

        let fill_xavier = |a: &mut Array2<F>, rng: &mut ChaCha8Rng| {
            let (n_in, n_out) = (a.nrows() as f64, a.ncols() as f64);
            let limit = (6.0 / (n_in + n_out)).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).unwrap();
            for v in a.iter_mut() {
                *v = F::from(dist.sample(rng)).unwrap();
            }
        };
        fill_xavier(&mut p.interaction_proj, &mut rng);
        fill_xavier(&mut p.exercise_proj, &mut rng);
        for blk in &mut p.encoder {
            fill_xavier(&mut blk.mha.w_q, &mut rng);
            fill_xavier(&mut blk.mha.w_k, &mut rng);
            fill_xavier(&mut blk.mha.w_v, &mut rng);
            fill_xavier(&mut blk.mha.w_o, &mut rng);
            fill_xavier(&mut blk.ffn.w1, &mut rng);
            fill_xavier(&mut blk.ffn.w2, &mut rng);
            blk.norm_attn = NormParams::identity(d);
            blk.norm_ffn = NormParams::identity(d);
        }
        for blk in &mut p.decoder {
            fill_xavier(&mut blk.mha.w_q, &mut rng);
            fill_xavier(&mut blk.mha.w_k, &mut rng);
            fill_xavier(&mut blk.mha.w_v, &mut rng);
            fill_xavier(&mut blk.mha.w_o, &mut rng);
            fill_xavier(&mut blk.ffn.w1, &mut rng);
            fill_xavier(&mut blk.ffn.w2, &mut rng);
            blk.norm_self = NormParams::identity(d);
            blk.norm_cross = NormParams::identity(d);
            blk.norm_ffn = NormParams::identity(d);
        }
        fill_xavier(&mut p.head_w, &mut rng);
        p
    }

    pub fn count(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    /// In-place elementwise fma: self += other * scale.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        let mut mine = self.named_tensors_mut();
        let theirs = other.named_tensors();
        for ((_, dst), (_, _, src)) in mine.iter_mut().zip(theirs.iter()) {
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d += s * scale;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for (_, t) in self.named_tensors_mut().iter_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Convert precision, e.g. a trained f32 set into f64 for checking.
    pub fn cast<G: NdFloat>(&self) -> ParamSet<G> {
        fn c2<F: NdFloat, G: NdFloat>(a: &Array2<F>) -> Array2<G> {
            a.mapv(|v| G::from(v).unwrap())
        }
        fn c1<F: NdFloat, G: NdFloat>(a: &Array1<F>) -> Array1<G> {
            a.mapv(|v| G::from(v).unwrap())
        }
        ParamSet {
            interaction_embedding: c2(&self.interaction_embedding),
            exercise_embedding: c2(&self.exercise_embedding),
            interaction_proj: c2(&self.interaction_proj),
            exercise_proj: c2(&self.exercise_proj),
            encoder: self
                .encoder
                .iter()
                .map(|b| EncoderParams {
                    mha: MhaParams {
                        w_q: c2(&b.mha.w_q),
                        w_k: c2(&b.mha.w_k),
                        w_v: c2(&b.mha.w_v),
                        w_o: c2(&b.mha.w_o),
                    },
                    ffn: FfnParams {
                        w1: c2(&b.ffn.w1),
                        b1: c1(&b.ffn.b1),
                        w2: c2(&b.ffn.w2),
                        b2: c1(&b.ffn.b2),
                    },
                    norm_attn: NormParams {
                        gamma: c1(&b.norm_attn.gamma),
                        beta: c1(&b.norm_attn.beta),
                    },
                    norm_ffn: NormParams {
                        gamma: c1(&b.norm_ffn.gamma),
                        beta: c1(&b.norm_ffn.beta),
                    },
                })
                .collect(),
            decoder: self
                .decoder
                .iter()
                .map(|b| DecoderParams {
                    mha: MhaParams {
                        w_q: c2(&b.mha.w_q),
                        w_k: c2(&b.mha.w_k),
                        w_v: c2(&b.mha.w_v),
                        w_o: c2(&b.mha.w_o),
                    },
                    ffn: FfnParams {
                        w1: c2(&b.ffn.w1),
                        b1: c1(&b.ffn.b1),
                        w2: c2(&b.ffn.w2),
                        b2: c1(&b.ffn.b2),
                    },
                    norm_self: NormParams {
                        gamma: c1(&b.norm_self.gamma),
                        beta: c1(&b.norm_self.beta),
                    },
                    norm_cross: NormParams {
                        gamma: c1(&b.norm_cross.gamma),
                        beta: c1(&b.norm_cross.beta),
                    },
                    norm_ffn: NormParams {
                        gamma: c1(&b.norm_ffn.gamma),
                        beta: c1(&b.norm_ffn.beta),
                    },
                })
                .collect(),
            head_w: c2(&self.head_w),
            head_b: c1(&self.head_b),
        }
    }
}

/// Closed-form parameter count. The decoder attention set is counted ONCE;
/// an independent (unshared) decoder would add 4*d*d more per block.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let (e, d, d_ff, n) = (
        cfg.exercise_count,
        cfg.model_dim,
        cfg.ffn_dim,
        cfg.block_count,
    );
    let embeddings = (2 * e + 1) * d + (e + 1) * d;
    let projections = 2 * d * d;
    let mha = 4 * d * d;
    let ffn = d * d_ff + d_ff + d_ff * d + d;
    let norm = 2 * d;
    let encoder = n * (mha + ffn + 2 * norm);
    let decoder = n * (mha + ffn + 3 * norm);
    let head = d + 1;
    embeddings + projections + encoder + decoder + head
}

macro_rules! push_tensors {
    ($vec:ident, $name:expr, $arr2:expr) => {
        $vec.push((
            $name,
            $arr2.shape().to_vec(),
            $arr2.as_slice().expect("standard layout"),
        ));
    };
}

macro_rules! push_tensors_mut {
    ($vec:ident, $name:expr, $arr2:expr) => {
        $vec.push((
            $name,
            $arr2.as_slice_mut().expect("standard layout"),
        ));
    };
}

impl<F: NdFloat> ParamTensors<F> for ParamSet<F> {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let mut v: Vec<(String, Vec<usize>, &[F])> = Vec::new();
        push_tensors!(v, "interaction_embedding".into(), self.interaction_embedding);
        push_tensors!(v, "exercise_embedding".into(), self.exercise_embedding);
        push_tensors!(v, "interaction_proj".into(), self.interaction_proj);
        push_tensors!(v, "exercise_proj".into(), self.exercise_proj);
        for (i, b) in self.encoder.iter().enumerate() {
            push_tensors!(v, format!("encoder.{i}.mha.w_q"), b.mha.w_q);
            push_tensors!(v, format!("encoder.{i}.mha.w_k"), b.mha.w_k);
            push_tensors!(v, format!("encoder.{i}.mha.w_v"), b.mha.w_v);
            push_tensors!(v, format!("encoder.{i}.mha.w_o"), b.mha.w_o);
            push_tensors!(v, format!("encoder.{i}.ffn.w1"), b.ffn.w1);
            push_tensors!(v, format!("encoder.{i}.ffn.b1"), b.ffn.b1);
            push_tensors!(v, format!("encoder.{i}.ffn.w2"), b.ffn.w2);
            push_tensors!(v, format!("encoder.{i}.ffn.b2"), b.ffn.b2);
            push_tensors!(v, format!("encoder.{i}.norm_attn.gamma"), b.norm_attn.gamma);
            push_tensors!(v, format!("encoder.{i}.norm_attn.beta"), b.norm_attn.beta);
            push_tensors!(v, format!("encoder.{i}.norm_ffn.gamma"), b.norm_ffn.gamma);
            push_tensors!(v, format!("encoder.{i}.norm_ffn.beta"), b.norm_ffn.beta);
        }
        for (i, b) in self.decoder.iter().enumerate() {
            push_tensors!(v, format!("decoder.{i}.mha.w_q"), b.mha.w_q);
            push_tensors!(v, format!("decoder.{i}.mha.w_k"), b.mha.w_k);
            push_tensors!(v, format!("decoder.{i}.mha.w_v"), b.mha.w_v);
            push_tensors!(v, format!("decoder.{i}.mha.w_o"), b.mha.w_o);
            push_tensors!(v, format!("decoder.{i}.ffn.w1"), b.ffn.w1);
            push_tensors!(v, format!("decoder.{i}.ffn.b1"), b.ffn.b1);
            push_tensors!(v, format!("decoder.{i}.ffn.w2"), b.ffn.w2);
            push_tensors!(v, format!("decoder.{i}.ffn.b2"), b.ffn.b2);
            push_tensors!(v, format!("decoder.{i}.norm_self.gamma"), b.norm_self.gamma);
            push_tensors!(v, format!("decoder.{i}.norm_self.beta"), b.norm_self.beta);
            push_tensors!(v, format!("decoder.{i}.norm_cross.gamma"), b.norm_cross.gamma);
            push_tensors!(v, format!("decoder.{i}.norm_cross.beta"), b.norm_cross.beta);
            push_tensors!(v, format!("decoder.{i}.norm_ffn.gamma"), b.norm_ffn.gamma);
            push_tensors!(v, format!("decoder.{i}.norm_ffn.beta"), b.norm_ffn.beta);
        }
        push_tensors!(v, "head.w".into(), self.head_w);
        push_tensors!(v, "head.b".into(), self.head_b);
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [F])> {
        let mut v: Vec<(String, &mut [F])> = Vec::new();
        push_tensors_mut!(v, "interaction_embedding".into(), self.interaction_embedding);
        push_tensors_mut!(v, "exercise_embedding".into(), self.exercise_embedding);
        push_tensors_mut!(v, "interaction_proj".into(), self.interaction_proj);
        push_tensors_mut!(v, "exercise_proj".into(), self.exercise_proj);
        for (i, b) in self.encoder.iter_mut().enumerate() {
            push_tensors_mut!(v, format!("encoder.{i}.mha.w_q"), b.mha.w_q);
            push_tensors_mut!(v, format!("encoder.{i}.mha.w_k"), b.mha.w_k);
            push_tensors_mut!(v, format!("encoder.{i}.mha.w_v"), b.mha.w_v);
            push_tensors_mut!(v, format!("encoder.{i}.mha.w_o"), b.mha.w_o);
            push_tensors_mut!(v, format!("encoder.{i}.ffn.w1"), b.ffn.w1);
            push_tensors_mut!(v, format!("encoder.{i}.ffn.b1"), b.ffn.b1);
            push_tensors_mut!(v, format!("encoder.{i}.ffn.w2"), b.ffn.w2);
            push_tensors_mut!(v, format!("encoder.{i}.ffn.b2"), b.ffn.b2);
            push_tensors_mut!(v, format!("encoder.{i}.norm_attn.gamma"), b.norm_attn.gamma);
            push_tensors_mut!(v, format!("encoder.{i}.norm_attn.beta"), b.norm_attn.beta);
            push_tensors_mut!(v, format!("encoder.{i}.norm_ffn.gamma"), b.norm_ffn.gamma);
            push_tensors_mut!(v, format!("encoder.{i}.norm_ffn.beta"), b.norm_ffn.beta);
        }
        for (i, b) in self.decoder.iter_mut().enumerate() {
            push_tensors_mut!(v, format!("decoder.{i}.mha.w_q"), b.mha.w_q);
            push_tensors_mut!(v, format!("decoder.{i}.mha.w_k"), b.mha.w_k);
            push_tensors_mut!(v, format!("decoder.{i}.mha.w_v"), b.mha.w_v);
            push_tensors_mut!(v, format!("decoder.{i}.mha.w_o"), b.mha.w_o);
            push_tensors_mut!(v, format!("decoder.{i}.ffn.w1"), b.ffn.w1);
            push_tensors_mut!(v, format!("decoder.{i}.ffn.b1"), b.ffn.b1);
            push_tensors_mut!(v, format!("decoder.{i}.ffn.w2"), b.ffn.w2);
            push_tensors_mut!(v, format!("decoder.{i}.ffn.b2"), b.ffn.b2);
            push_tensors_mut!(v, format!("decoder.{i}.norm_self.gamma"), b.norm_self.gamma);
            push_tensors_mut!(v, format!("decoder.{i}.norm_self.beta"), b.norm_self.beta);
            push_tensors_mut!(v, format!("decoder.{i}.norm_cross.gamma"), b.norm_cross.gamma);
            push_tensors_mut!(v, format!("decoder.{i}.norm_cross.beta"), b.norm_cross.beta);
            push_tensors_mut!(v, format!("decoder.{i}.norm_ffn.gamma"), b.norm_ffn.gamma);
            push_tensors_mut!(v, format!("decoder.{i}.norm_ffn.beta"), b.norm_ffn.beta);
        }
        push_tensors_mut!(v, "head.w".into(), self.head_w);
        push_tensors_mut!(v, "head.b".into(), self.head_b);
        v
    }
}
