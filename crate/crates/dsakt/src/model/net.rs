//! The assembled network: embedding with sinusoidal positions and stream
//! projections, a causally masked encoder, the shared-weight double-attention
//! decoder, and the sigmoid head.
//!
//! Position t of a window sees interactions 1..=t and the exercise queried at
//! t+1, and predicts that exercise's correctness. The causal mask keeps every
//! later position out of reach, in the encoder, the decoder self-attention,
//! AND the decoder cross-attention: unmasked cross-attention would let
//! position t read encoder states that already encode the response being
//! predicted.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis, NdFloat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::EncodedWindow;
use crate::error::{Error, Result};
use crate::kernel::ops::{
    bce_masked, bce_masked_grad_logits, layer_norm_backward, layer_norm_cached, relu,
    relu_backward, sigmoid, LayerNormCache,
};

use super::attention::{causal_mask, multi_head_backward, multi_head_forward, MhaCache};
use super::config::ModelConfig;
use super::params::{DecoderParams, EncoderParams, FfnParams, NormParams, ParamSet};
use super::position::positional_table;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-head attention weights captured in one block.
#[derive(Debug, Clone)]
pub struct BlockAttention<F> {
    pub encoder_self: Array3<F>,
    pub decoder_self: Array3<F>,
    pub decoder_cross: Array3<F>,
}

/// Intermediate outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    pub interaction_embedded: Array2<F>,
    pub exercise_embedded: Array2<F>,
    pub encoder_output: Array2<F>,
    pub logits: Array1<F>,
    pub probs: Array1<F>,
    pub attention: Vec<BlockAttention<F>>,
}

struct FfnCache<F> {
    input: Array2<F>,
    hidden: Array2<F>, // post-relu
}

struct SublayerCache<F> {
    mha: MhaCache<F>,
    dropout: Option<Array2<F>>,
    norm: LayerNormCache<F>,
}

struct EncoderBlockCache<F> {
    input: Array2<F>,
    attn: SublayerCache<F>,
    ffn: FfnCache<F>,
    ffn_dropout: Option<Array2<F>>,
    norm_ffn: LayerNormCache<F>,
    output: Array2<F>,
}

struct DecoderBlockCache<F> {
    input: Array2<F>,
    self_attn: SublayerCache<F>,
    after_self: Array2<F>, // y
    cross_attn: SublayerCache<F>,
    ffn: FfnCache<F>,
    ffn_dropout: Option<Array2<F>>,
    norm_ffn: LayerNormCache<F>,
    output: Array2<F>,
}

struct ForwardCache<F> {
    interaction_summed: Array2<F>, // lookup + position, pre-projection
    exercise_summed: Array2<F>,
    interaction_embedded: Array2<F>,
    exercise_embedded: Array2<F>,
    encoder: Vec<EncoderBlockCache<F>>,
    decoder: Vec<DecoderBlockCache<F>>,
    logits: Array1<F>,
    probs: Array1<F>,
}

impl<F: NdFloat> ForwardCache<F> {
    fn encoder_output(&self) -> &Array2<F> {
        &self.encoder.last().expect("block_count >= 1").output
    }

    fn into_trace(self) -> ForwardTrace<F> {
        let attention = self
            .encoder
            .iter()
            .zip(self.decoder.iter())
            .map(|(e, d)| BlockAttention {
                encoder_self: e.attn.mha.weights.clone(),
                decoder_self: d.self_attn.mha.weights.clone(),
                decoder_cross: d.cross_attn.mha.weights.clone(),
            })
            .collect();
        let encoder_output = self.encoder_output().clone();
        ForwardTrace {
            interaction_embedded: self.interaction_embedded,
            exercise_embedded: self.exercise_embedded,
            encoder_output,
            logits: self.logits,
            probs: self.probs,
            attention,
        }
    }
}

/// Config, parameters, and the fixed position table and causal mask bundled
/// for forward/backward evaluation.
#[derive(Debug, Clone)]
pub struct Model<F: NdFloat> {
    pub config: ModelConfig,
    pub params: ParamSet<F>,
    position: Array2<F>,
    mask: Array2<bool>,
}

impl<F: NdFloat> Model<F> {
    pub fn new(config: ModelConfig, params: ParamSet<F>) -> Result<Self> {
        config.validate()?;
        let expected = super::params::param_count(&config);
        let actual = {
            use crate::kernel::ParamTensors;
            params.named_tensors().iter().map(|(_, _, d)| d.len()).sum::<usize>()
        };
        if expected != actual {
            return Err(Error::InvalidConfig(format!(
                "parameter set has {actual} values, config implies {expected}"
            )));
        }
        let position = positional_table(config.window_len, config.model_dim);
        let mask = causal_mask(config.window_len);
        Ok(Self {
            config,
            params,
            position,
            mask,
        })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ParamSet::init(&config, seed);
        Self::new(config, params)
    }

    /// Full pipeline on one window: embed, encode, decode, sigmoid.
    /// Dropout is inactive (inference path).
    pub fn forward(&self, window: &EncodedWindow) -> Result<(Array1<F>, ForwardTrace<F>)> {
        let cache = self.forward_cached(window, None)?;
        let probs = cache.probs.clone();
        Ok((probs, cache.into_trace()))
    }

    /// Probabilities only, skipping the trace copies.
    pub fn probabilities(&self, window: &EncodedWindow) -> Result<Array1<F>> {
        Ok(self.forward_cached(window, None)?.probs)
    }

    /// Mean masked BCE of one window plus parameter gradients accumulated
    /// into `grads`. Pass an RNG to activate dropout during training.
    pub fn loss_and_grad(
        &self,
        window: &EncodedWindow,
        grads: &mut ParamSet<F>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<F> {
        let cache = self.forward_cached(window, rng)?;
        let loss = bce_masked(&cache.probs.view(), &window.targets, &window.valid_mask)?;
        let d_logits =
            bce_masked_grad_logits(&cache.probs.view(), &window.targets, &window.valid_mask)?;
        self.backward(window, &cache, &d_logits, grads);
        Ok(loss)
    }

    /// Loss without gradients (validation path; no dropout).
    pub fn loss(&self, window: &EncodedWindow) -> Result<F> {
        let probs = self.probabilities(window)?;
        bce_masked(&probs.view(), &window.targets, &window.valid_mask)
    }

    fn check_window(&self, window: &EncodedWindow) -> Result<()> {
        let k = self.config.window_len;
        let e = self.config.exercise_count as u32;
        if window.interaction_tokens.len() != k
            || window.query_tokens.len() != k
            || window.targets.len() != k
            || window.valid_mask.len() != k
        {
            return Err(Error::ShapeMismatch {
                op: "forward window",
                left: vec![window.interaction_tokens.len()],
                right: vec![k],
            });
        }
        for &t in &window.interaction_tokens {
            if t > 2 * e {
                return Err(Error::TokenOutOfRange { token: t, max: 2 * e });
            }
        }
        for &t in &window.query_tokens {
            if t > e {
                return Err(Error::TokenOutOfRange { token: t, max: e });
            }
        }
        Ok(())
    }

    fn dropout(
        &self,
        x: &mut Array2<F>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Option<Array2<F>> {
        let rate = self.config.dropout_rate;
        let rng = match rng {
            Some(r) if rate > 0.0 => r,
            _ => return None,
        };
        let keep = F::from(1.0 / (1.0 - rate)).unwrap();
        let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
            if rng.random_bool(rate) {
                F::zero()
            } else {
                keep
            }
        });
        *x *= &mask;
        Some(mask)
    }

    fn embed(
        &self,
        tokens: &[u32],
        table: &Array2<F>,
        proj: &Array2<F>,
    ) -> (Array2<F>, Array2<F>) {
        let (k, d) = (self.config.window_len, self.config.model_dim);
        let mut summed = Array2::zeros((k, d));
        for (t, &tok) in tokens.iter().enumerate() {
            let row = table.row(tok as usize);
            let pos = self.position.row(t);
            for c in 0..d {
                summed[[t, c]] = row[c] + pos[c];
            }
        }
        let projected = summed.dot(proj);
        (projected, summed)
    }

    fn embed_backward(
        d_projected: &ArrayView2<F>,
        summed: &Array2<F>,
        proj: &Array2<F>,
        tokens: &[u32],
        d_table: &mut Array2<F>,
        d_proj: &mut Array2<F>,
    ) {
        *d_proj += &summed.t().dot(d_projected);
        let d_summed = d_projected.dot(&proj.t());
        for (t, &tok) in tokens.iter().enumerate() {
            let mut row = d_table.row_mut(tok as usize);
            row += &d_summed.row(t);
        }
    }

    fn ffn_forward(&self, x: &Array2<F>, p: &FfnParams<F>) -> (Array2<F>, FfnCache<F>) {
        let pre = x.dot(&p.w1) + &p.b1;
        let hidden = relu(&pre.view());
        let out = hidden.dot(&p.w2) + &p.b2;
        (
            out,
            FfnCache {
                input: x.clone(),
                hidden,
            },
        )
    }

    fn ffn_backward(
        d_out: &ArrayView2<F>,
        cache: &FfnCache<F>,
        p: &FfnParams<F>,
        g: &mut FfnParams<F>,
    ) -> Array2<F> {
        g.b2 += &d_out.sum_axis(Axis(0));
        g.w2 += &cache.hidden.t().dot(d_out);
        let d_hidden = d_out.dot(&p.w2.t());
        let d_pre = relu_backward(&d_hidden.view(), &cache.hidden.view());
        g.b1 += &d_pre.sum_axis(Axis(0));
        g.w1 += &cache.input.t().dot(&d_pre);
        d_pre.dot(&p.w1.t())
    }

    fn norm(&self, x: &Array2<F>, p: &NormParams<F>) -> (Array2<F>, LayerNormCache<F>) {
        layer_norm_cached(
            &x.view(),
            &p.gamma.view(),
            &p.beta.view(),
            F::from(LAYER_NORM_EPS).unwrap(),
        )
    }

    fn encoder_block(
        &self,
        x: &Array2<F>,
        p: &EncoderParams<F>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<EncoderBlockCache<F>> {
        let (mut attn_out, mha) = multi_head_forward(
            &x.view(),
            &x.view(),
            &p.mha,
            &self.mask,
            self.config.head_count,
            self.config.score_scale_dim(),
        )?;
        let dropout = self.dropout(&mut attn_out, rng);
        let (y, norm_attn) = self.norm(&(x + &attn_out), &p.norm_attn);
        let (mut ffn_out, ffn) = self.ffn_forward(&y, &p.ffn);
        let ffn_dropout = self.dropout(&mut ffn_out, rng);
        let (z, norm_ffn) = self.norm(&(&y + &ffn_out), &p.norm_ffn);
        Ok(EncoderBlockCache {
            input: x.clone(),
            attn: SublayerCache {
                mha,
                dropout,
                norm: norm_attn,
            },
            ffn,
            ffn_dropout,
            norm_ffn,
            output: z,
        })
    }

    fn decoder_block(
        &self,
        x: &Array2<F>,
        encoder_out: &Array2<F>,
        p: &DecoderParams<F>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<DecoderBlockCache<F>> {
        let h = self.config.head_count;
        let scale = self.config.score_scale_dim();
        let (mut self_out, self_mha) =
            multi_head_forward(&x.view(), &x.view(), &p.mha, &self.mask, h, scale)?;
        let self_dropout = self.dropout(&mut self_out, rng);
        let (y, norm_self) = self.norm(&(x + &self_out), &p.norm_self);
        // Second application of the SAME weight tensors, keys/values from the
        // encoder, causally masked.
        let (mut cross_out, cross_mha) =
            multi_head_forward(&y.view(), &encoder_out.view(), &p.mha, &self.mask, h, scale)?;
        let cross_dropout = self.dropout(&mut cross_out, rng);
        let (z, norm_cross) = self.norm(&(&y + &cross_out), &p.norm_cross);
        let (mut ffn_out, ffn) = self.ffn_forward(&z, &p.ffn);
        let ffn_dropout = self.dropout(&mut ffn_out, rng);
        let (w, norm_ffn) = self.norm(&(&z + &ffn_out), &p.norm_ffn);
        Ok(DecoderBlockCache {
            input: x.clone(),
            self_attn: SublayerCache {
                mha: self_mha,
                dropout: self_dropout,
                norm: norm_self,
            },
            after_self: y,
            cross_attn: SublayerCache {
                mha: cross_mha,
                dropout: cross_dropout,
                norm: norm_cross,
            },
            ffn,
            ffn_dropout,
            norm_ffn,
            output: w,
        })
    }

    fn forward_cached(
        &self,
        window: &EncodedWindow,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache<F>> {
        self.check_window(window)?;
        let p = &self.params;
        let (interaction_embedded, interaction_summed) = self.embed(
            &window.interaction_tokens,
            &p.interaction_embedding,
            &p.interaction_proj,
        );
        let (exercise_embedded, exercise_summed) =
            self.embed(&window.query_tokens, &p.exercise_embedding, &p.exercise_proj);

        let mut encoder = Vec::with_capacity(p.encoder.len());
        let mut x = interaction_embedded.clone();
        for blk in &p.encoder {
            let cache = self.encoder_block(&x, blk, &mut rng)?;
            x = cache.output.clone();
            encoder.push(cache);
        }
        let encoder_out = x;

        let mut decoder = Vec::with_capacity(p.decoder.len());
        let mut x = exercise_embedded.clone();
        for blk in &p.decoder {
            let cache = self.decoder_block(&x, &encoder_out, blk, &mut rng)?;
            x = cache.output.clone();
            decoder.push(cache);
        }

        let logits_col = x.dot(&p.head_w);
        let logits = logits_col.column(0).to_owned() + p.head_b[0];
        let probs = sigmoid(&logits.view());
        Ok(ForwardCache {
            interaction_summed,
            exercise_summed,
            interaction_embedded,
            exercise_embedded,
            encoder,
            decoder,
            logits,
            probs,
        })
    }

    fn drop_grad(d: &Array2<F>, mask: &Option<Array2<F>>) -> Array2<F> {
        match mask {
            Some(m) => d * m,
            None => d.clone(),
        }
    }

    fn encoder_block_backward(
        &self,
        d_out: &Array2<F>,
        cache: &EncoderBlockCache<F>,
        p: &EncoderParams<F>,
        g: &mut EncoderParams<F>,
    ) -> Array2<F> {
        let d_sum = layer_norm_backward(
            &d_out.view(),
            &cache.norm_ffn,
            &p.norm_ffn.gamma.view(),
            &mut g.norm_ffn.gamma,
            &mut g.norm_ffn.beta,
        );
        let d_ffn_out = Self::drop_grad(&d_sum, &cache.ffn_dropout);
        let mut d_y = d_sum;
        d_y += &Self::ffn_backward(&d_ffn_out.view(), &cache.ffn, &p.ffn, &mut g.ffn);

        let d_sum = layer_norm_backward(
            &d_y.view(),
            &cache.attn.norm,
            &p.norm_attn.gamma.view(),
            &mut g.norm_attn.gamma,
            &mut g.norm_attn.beta,
        );
        let d_attn_out = Self::drop_grad(&d_sum, &cache.attn.dropout);
        let mut d_x = d_sum;
        let (d_q_in, d_kv_in) = multi_head_backward(
            &d_attn_out.view(),
            &cache.input.view(),
            &cache.input.view(),
            &p.mha,
            &cache.attn.mha,
            &mut g.mha,
            self.config.head_count,
            self.config.score_scale_dim(),
        );
        d_x += &d_q_in;
        d_x += &d_kv_in;
        d_x
    }

    /// Returns (d_input, d_encoder_out).
    fn decoder_block_backward(
        &self,
        d_out: &Array2<F>,
        cache: &DecoderBlockCache<F>,
        encoder_out: &Array2<F>,
        p: &DecoderParams<F>,
        g: &mut DecoderParams<F>,
    ) -> (Array2<F>, Array2<F>) {
        let h = self.config.head_count;
        let scale = self.config.score_scale_dim();

        let d_sum = layer_norm_backward(
            &d_out.view(),
            &cache.norm_ffn,
            &p.norm_ffn.gamma.view(),
            &mut g.norm_ffn.gamma,
            &mut g.norm_ffn.beta,
        );
        let d_ffn_out = Self::drop_grad(&d_sum, &cache.ffn_dropout);
        let mut d_z = d_sum;
        d_z += &Self::ffn_backward(&d_ffn_out.view(), &cache.ffn, &p.ffn, &mut g.ffn);

        let d_sum = layer_norm_backward(
            &d_z.view(),
            &cache.cross_attn.norm,
            &p.norm_cross.gamma.view(),
            &mut g.norm_cross.gamma,
            &mut g.norm_cross.beta,
        );
        let d_cross_out = Self::drop_grad(&d_sum, &cache.cross_attn.dropout);
        let mut d_y = d_sum;
        let (d_q_in, d_enc) = multi_head_backward(
            &d_cross_out.view(),
            &cache.after_self.view(),
            &encoder_out.view(),
            &p.mha,
            &cache.cross_attn.mha,
            &mut g.mha,
            h,
            scale,
        );
        d_y += &d_q_in;

        let d_sum = layer_norm_backward(
            &d_y.view(),
            &cache.self_attn.norm,
            &p.norm_self.gamma.view(),
            &mut g.norm_self.gamma,
            &mut g.norm_self.beta,
        );
        let d_self_out = Self::drop_grad(&d_sum, &cache.self_attn.dropout);
        let mut d_x = d_sum;
        // second accumulation into the SAME g.mha tensors
        let (d_q_in, d_kv_in) = multi_head_backward(
            &d_self_out.view(),
            &cache.input.view(),
            &cache.input.view(),
            &p.mha,
            &cache.self_attn.mha,
            &mut g.mha,
            h,
            scale,
        );
        d_x += &d_q_in;
        d_x += &d_kv_in;
        (d_x, d_enc)
    }

    fn backward(
        &self,
        window: &EncodedWindow,
        cache: &ForwardCache<F>,
        d_logits: &Array1<F>,
        grads: &mut ParamSet<F>,
    ) {
        let p = &self.params;
        let k = self.config.window_len;
        let encoder_out = cache.encoder_output().clone();

        // head
        let d_logits_col = d_logits.view().into_shape_with_order((k, 1)).unwrap();
        let dec_out = &cache.decoder.last().expect("block_count >= 1").output;
        grads.head_w += &dec_out.t().dot(&d_logits_col);
        grads.head_b[0] += d_logits.sum();
        let mut d_dec = d_logits_col.dot(&p.head_w.t());

        // decoder stack, accumulating the encoder gradient from every block
        let mut d_enc_total: Array2<F> = Array2::zeros(encoder_out.raw_dim());
        for i in (0..p.decoder.len()).rev() {
            let (d_in, d_enc) = self.decoder_block_backward(
                &d_dec,
                &cache.decoder[i],
                &encoder_out,
                &p.decoder[i],
                &mut grads.decoder[i],
            );
            d_dec = d_in;
            d_enc_total += &d_enc;
        }

        let mut d_enc = d_enc_total;
        for i in (0..p.encoder.len()).rev() {
            d_enc = self.encoder_block_backward(
                &d_enc,
                &cache.encoder[i],
                &p.encoder[i],
                &mut grads.encoder[i],
            );
        }

        Self::embed_backward(
            &d_enc.view(),
            &cache.interaction_summed,
            &p.interaction_proj,
            &window.interaction_tokens,
            &mut grads.interaction_embedding,
            &mut grads.interaction_proj,
        );
        Self::embed_backward(
            &d_dec.view(),
            &cache.exercise_summed,
            &p.exercise_proj,
            &window.query_tokens,
            &mut grads.exercise_embedding,
            &mut grads.exercise_proj,
        );
    }
}
