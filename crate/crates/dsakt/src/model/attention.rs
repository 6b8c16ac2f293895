//! Multi-head scaled dot-product attention with a causal mask, forward and
//! hand-derived backward.

use ndarray::{s, Array2, Array3, ArrayView2, NdFloat};

use crate::error::Result;
use crate::kernel::ops::{softmax_backward, softmax_masked};

use super::params::MhaParams;

/// Lower-triangular attend-self-and-past mask: mask[t][s] = true iff s <= t.
pub fn causal_mask(k: usize) -> Array2<bool> {
    Array2::from_shape_fn((k, k), |(t, c)| c <= t)
}

/// Everything the backward pass needs from one attention application.
pub struct MhaCache<F> {
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Per-head attention weights [h, k, k]; also the public trace payload.
    pub weights: Array3<F>,
    /// Concatenated head outputs before the output projection.
    ctx: Array2<F>,
}

/// One multi-head attention application. Queries come from `q_in`, keys and
/// values from `kv_in` (equal to `q_in` for self-attention). Projections
/// carry no bias. Returns output [k, d] and the cache.
pub fn multi_head_forward<F: NdFloat>(
    q_in: &ArrayView2<F>,
    kv_in: &ArrayView2<F>,
    params: &MhaParams<F>,
    mask: &Array2<bool>,
    head_count: usize,
    scale_dim: usize,
) -> Result<(Array2<F>, MhaCache<F>)> {
    let (k_len, d) = (q_in.nrows(), q_in.ncols());
    let dh = d / head_count;
    let scale = F::from(1.0 / (scale_dim as f64).sqrt()).unwrap();

    let q = q_in.dot(&params.w_q);
    let k = kv_in.dot(&params.w_k);
    let v = kv_in.dot(&params.w_v);

    let mut weights = Array3::zeros((head_count, k_len, k_len));
    let mut ctx = Array2::zeros((k_len, d));
    for h in 0..head_count {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let scores = qh.dot(&kh.t()).mapv_into(|x| x * scale);
        let attn = softmax_masked(&scores.view(), mask)?;
        ctx.slice_mut(cols).assign(&attn.dot(&vh));
        weights.slice_mut(s![h, .., ..]).assign(&attn);
    }
    let out = ctx.dot(&params.w_o);
    Ok((
        out,
        MhaCache {
            q,
            k,
            v,
            weights,
            ctx,
        },
    ))
}

/// Backward of [`multi_head_forward`]. Accumulates weight gradients into
/// `grads` (so a second application on the same tensors adds up) and returns
/// (d_q_in, d_kv_in); the caller sums them when q_in and kv_in alias.
pub fn multi_head_backward<F: NdFloat>(
    d_out: &ArrayView2<F>,
    q_in: &ArrayView2<F>,
    kv_in: &ArrayView2<F>,
    params: &MhaParams<F>,
    cache: &MhaCache<F>,
    grads: &mut MhaParams<F>,
    head_count: usize,
    scale_dim: usize,
) -> (Array2<F>, Array2<F>) {
    let (k_len, d) = (q_in.nrows(), q_in.ncols());
    let dh = d / head_count;
    let scale = F::from(1.0 / (scale_dim as f64).sqrt()).unwrap();

    grads.w_o += &cache.ctx.t().dot(d_out);
    let d_ctx = d_out.dot(&params.w_o.t());

    let mut dq = Array2::zeros((k_len, d));
    let mut dk = Array2::zeros((k_len, d));
    let mut dv = Array2::zeros((k_len, d));
    for h in 0..head_count {
        let cols = s![.., h * dh..(h + 1) * dh];
        let attn = cache.weights.slice(s![h, .., ..]);
        let d_ctx_h = d_ctx.slice(cols);
        let vh = cache.v.slice(cols);
        let qh = cache.q.slice(cols);
        let kh = cache.k.slice(cols);

        let d_attn = d_ctx_h.dot(&vh.t());
        dv.slice_mut(cols).assign(&attn.t().dot(&d_ctx_h));
        let d_scores = softmax_backward(&d_attn.view(), &attn).mapv_into(|x| x * scale);
        dq.slice_mut(cols).assign(&d_scores.dot(&kh));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&qh));
    }

    grads.w_q += &q_in.t().dot(&dq);
    grads.w_k += &kv_in.t().dot(&dk);
    grads.w_v += &kv_in.t().dot(&dv);
    let d_q_in = dq.dot(&params.w_q.t());
    let d_kv_in = dk.dot(&params.w_k.t()) + dv.dot(&params.w_v.t());
    (d_q_in, d_kv_in)
}
