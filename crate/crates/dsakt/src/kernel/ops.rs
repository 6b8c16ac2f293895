//! Dense kernels used by the network: linear maps, activations, masked
//! softmax, layer normalization, and the masked binary cross entropy.
//!
//! Every kernel comes in a forward flavor and, where the model needs it, a
//! hand-derived backward flavor. Backward functions take whatever the forward
//! cached and accumulate parameter gradients with `+=` so that weight sharing
//! (the decoder attention applied twice) falls out of plain accumulation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, NdFloat};

use crate::error::{Error, Result};

/// Clamp applied to predicted probabilities before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

fn shape_of<D: ndarray::Dimension>(a: &ndarray::ArrayBase<impl ndarray::Data, D>) -> Vec<usize> {
    a.shape().to_vec()
}

/// y = x W + b, differentiable in x, W and b.
pub fn linear<F: NdFloat>(
    x: &ArrayView2<F>,
    w: &ArrayView2<F>,
    b: Option<&ArrayView1<F>>,
) -> Result<Array2<F>> {
    if x.ncols() != w.nrows() {
        return Err(Error::ShapeMismatch {
            op: "linear",
            left: shape_of(x),
            right: shape_of(w),
        });
    }
    if let Some(b) = b {
        if b.len() != w.ncols() {
            return Err(Error::ShapeMismatch {
                op: "linear bias",
                left: shape_of(w),
                right: shape_of(b),
            });
        }
    }
    let mut y = x.dot(w);
    if let Some(b) = b {
        y += b;
    }
    Ok(y)
}

/// Backward of [`linear`]: accumulates dW and db, returns dx.
pub fn linear_backward<F: NdFloat>(
    dy: &ArrayView2<F>,
    x: &ArrayView2<F>,
    w: &ArrayView2<F>,
    dw: &mut Array2<F>,
    db: Option<&mut Array1<F>>,
) -> Array2<F> {
    *dw += &x.t().dot(dy);
    if let Some(db) = db {
        *db += &dy.sum_axis(Axis(0));
    }
    dy.dot(&w.t())
}

pub fn relu<F: NdFloat>(x: &ArrayView2<F>) -> Array2<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

/// Backward of relu given the forward *output* (output > 0 iff input > 0).
pub fn relu_backward<F: NdFloat>(dy: &ArrayView2<F>, out: &ArrayView2<F>) -> Array2<F> {
    let mut dx = dy.to_owned();
    dx.zip_mut_with(out, |d, &o| {
        if o <= F::zero() {
            *d = F::zero();
        }
    });
    dx
}

/// Numerically stable logistic function; never under/overflows to NaN.
pub fn sigmoid_scalar<F: NdFloat>(x: F) -> F {
    if x >= F::zero() {
        let e = (-x).exp();
        F::one() / (F::one() + e)
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub fn sigmoid<F: NdFloat>(x: &ArrayView1<F>) -> Array1<F> {
    x.mapv(sigmoid_scalar)
}

/// Row-wise softmax over the entries allowed by `mask` (true = may attend).
/// Masked entries come out exactly zero; each row sums to one over the
/// allowed entries. Max subtraction runs over allowed entries only, so
/// values at masked positions cannot perturb the result in any bit.
pub fn softmax_masked<F: NdFloat>(scores: &ArrayView2<F>, mask: &Array2<bool>) -> Result<Array2<F>> {
    if scores.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            op: "softmax_masked",
            left: shape_of(scores),
            right: mask.shape().to_vec(),
        });
    }
    let mut out = Array2::zeros(scores.raw_dim());
    for (r, (row, mrow)) in scores.outer_iter().zip(mask.outer_iter()).enumerate() {
        let mut max = F::neg_infinity();
        for (&s, &m) in row.iter().zip(mrow.iter()) {
            if m && s > max {
                max = s;
            }
        }
        if max == F::neg_infinity() {
            return Err(Error::FullyMaskedRow { row: r });
        }
        let mut sum = F::zero();
        let mut orow = out.row_mut(r);
        for ((o, &s), &m) in orow.iter_mut().zip(row.iter()).zip(mrow.iter()) {
            if m {
                let e = (s - max).exp();
                *o = e;
                sum += e;
            }
        }
        orow.mapv_inplace(|v| v / sum);
    }
    Ok(out)
}

/// Backward of softmax per row: dS = A * (dA - sum(dA * A)).
/// Masked entries have A = 0, so their score gradient is exactly zero.
pub fn softmax_backward<F: NdFloat>(d_attn: &ArrayView2<F>, attn: &ArrayView2<F>) -> Array2<F> {
    let mut ds = Array2::zeros(attn.raw_dim());
    for ((mut ds_row, da_row), a_row) in ds
        .outer_iter_mut()
        .zip(d_attn.outer_iter())
        .zip(attn.outer_iter())
    {
        let dot = da_row.dot(&a_row);
        for ((d, &da), &a) in ds_row.iter_mut().zip(da_row.iter()).zip(a_row.iter()) {
            *d = a * (da - dot);
        }
    }
    ds
}

pub struct LayerNormCache<F> {
    pub normalized: Array2<F>,
    pub inv_std: Array1<F>,
}

/// Per-row layer normalization with biased variance:
/// y = (x - mean) / sqrt(var + eps) * gamma + beta.
pub fn layer_norm<F: NdFloat>(
    x: &ArrayView2<F>,
    gamma: &ArrayView1<F>,
    beta: &ArrayView1<F>,
    eps: F,
) -> Array2<F> {
    layer_norm_cached(x, gamma, beta, eps).0
}

pub fn layer_norm_cached<F: NdFloat>(
    x: &ArrayView2<F>,
    gamma: &ArrayView1<F>,
    beta: &ArrayView1<F>,
    eps: F,
) -> (Array2<F>, LayerNormCache<F>) {
    let d = F::from(x.ncols()).unwrap();
    let mut normalized = Array2::zeros(x.raw_dim());
    let mut inv_std = Array1::zeros(x.nrows());
    let mut y = Array2::zeros(x.raw_dim());
    for (r, row) in x.outer_iter().enumerate() {
        let mean = row.sum() / d;
        let var = row.fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean)) / d;
        let istd = F::one() / (var + eps).sqrt();
        inv_std[r] = istd;
        for (c, &v) in row.iter().enumerate() {
            let n = (v - mean) * istd;
            normalized[[r, c]] = n;
            y[[r, c]] = n * gamma[c] + beta[c];
        }
    }
    (y, LayerNormCache { normalized, inv_std })
}

/// Backward of layer_norm. Accumulates dgamma/dbeta, returns dx.
pub fn layer_norm_backward<F: NdFloat>(
    dy: &ArrayView2<F>,
    cache: &LayerNormCache<F>,
    gamma: &ArrayView1<F>,
    dgamma: &mut Array1<F>,
    dbeta: &mut Array1<F>,
) -> Array2<F> {
    let d = F::from(dy.ncols()).unwrap();
    let mut dx = Array2::zeros(dy.raw_dim());
    for (r, dy_row) in dy.outer_iter().enumerate() {
        let xhat = cache.normalized.row(r);
        let istd = cache.inv_std[r];
        let mut mean_dxhat = F::zero();
        let mut mean_dxhat_xhat = F::zero();
        for (c, &g) in dy_row.iter().enumerate() {
            dgamma[c] += g * xhat[c];
            dbeta[c] += g;
            let dxh = g * gamma[c];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[c];
        }
        mean_dxhat /= d;
        mean_dxhat_xhat /= d;
        for c in 0..dy.ncols() {
            let dxh = dy_row[c] * gamma[c];
            dx[[r, c]] = istd * (dxh - mean_dxhat - xhat[c] * mean_dxhat_xhat);
        }
    }
    dx
}

/// Mean binary cross entropy over valid positions. Predictions are clamped
/// to [BCE_CLAMP, 1 - BCE_CLAMP] before the logs.
pub fn bce_masked<F: NdFloat>(pred: &ArrayView1<F>, target: &[u8], valid: &[u8]) -> Result<F> {
    let n_valid = valid.iter().filter(|&&v| v != 0).count();
    if n_valid == 0 {
        return Err(Error::NoValidPositions);
    }
    let lo = F::from(BCE_CLAMP).unwrap();
    let hi = F::one() - lo;
    let mut sum = F::zero();
    for ((&p, &y), &v) in pred.iter().zip(target.iter()).zip(valid.iter()) {
        if v == 0 {
            continue;
        }
        let p = p.max(lo).min(hi);
        sum += if y != 0 { -p.ln() } else { -(F::one() - p).ln() };
    }
    Ok(sum / F::from(n_valid).unwrap())
}

/// Gradient of [`bce_masked`] with respect to the *logits* that produced
/// `probs` through a sigmoid: (p - y) / n_valid at valid positions, 0 at
/// padded ones. Exact wherever the clamp is inactive.
pub fn bce_masked_grad_logits<F: NdFloat>(
    probs: &ArrayView1<F>,
    target: &[u8],
    valid: &[u8],
) -> Result<Array1<F>> {
    let n_valid = valid.iter().filter(|&&v| v != 0).count();
    if n_valid == 0 {
        return Err(Error::NoValidPositions);
    }
    let scale = F::one() / F::from(n_valid).unwrap();
    let lo = F::from(BCE_CLAMP).unwrap();
    let hi = F::one() - lo;
    let mut grad = Array1::zeros(probs.len());
    for (t, ((&p, &y), &v)) in probs.iter().zip(target.iter()).zip(valid.iter()).enumerate() {
        if v == 0 {
            continue;
        }
        let p = p.max(lo).min(hi);
        let y = if y != 0 { F::one() } else { F::zero() };
        grad[t] = (p - y) * scale;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_identity_passes_through() {
        let x = array![[1.0, 2.0]];
        let w = Array2::eye(2);
        let y = linear(&x.view(), &w.view(), None).unwrap();
        assert_eq!(y, array![[1.0, 2.0]]);
    }

    #[test]
    fn linear_hand_product() {
        // [1,1] * [[2],[3]] + [1] = [6]
        let x = array![[1.0, 1.0]];
        let w = array![[2.0], [3.0]];
        let b = array![1.0];
        let y = linear(&x.view(), &w.view(), Some(&b.view())).unwrap();
        assert_eq!(y, array![[6.0]]);
    }

    #[test]
    fn linear_shape_mismatch_names_both_shapes() {
        let x = array![[1.0, 2.0, 3.0]];
        let w = array![[1.0], [1.0]];
        let err = linear(&x.view(), &w.view(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 1]"), "{msg}");
    }

    #[test]
    fn relu_clamps_negatives() {
        let x = array![[-1.0, 0.0, 2.0]];
        assert_eq!(relu(&x.view()), array![[0.0, 0.0, 2.0]]);
    }

    #[test]
    fn sigmoid_midpoint_and_extremes() {
        assert_eq!(sigmoid_scalar(0.0f64), 0.5);
        let v = sigmoid_scalar(-709.0f64);
        assert!(v > 0.0 && v.is_finite());
        // the positive tail saturates to exactly 1.0 without overflow
        let w = sigmoid_scalar(709.0f64);
        assert!(w <= 1.0 && w.is_finite());
    }

    #[test]
    fn softmax_masked_symmetry() {
        let scores: Array2<f64> = array![[0.0, 0.0, 55.0]];
        let mask = array![[true, true, false]];
        let a = softmax_masked(&scores.view(), &mask).unwrap();
        assert_eq!(a[[0, 2]], 0.0);
        assert!((a[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((a[[0, 1]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_single_allowed_key() {
        let scores = array![[-3.0, 7.0, 2.0]];
        let mask = array![[true, false, false]];
        let a = softmax_masked(&scores.view(), &mask).unwrap();
        assert_eq!(a, array![[1.0, 0.0, 0.0]]);
    }

    #[test]
    fn softmax_closed_form() {
        // softmax([1,2]) computed independently from the definition.
        let (e1, e2) = (1.0f64.exp(), 2.0f64.exp());
        let expect = [e1 / (e1 + e2), e2 / (e1 + e2)];
        let scores = array![[1.0, 2.0]];
        let mask = array![[true, true]];
        let a = softmax_masked(&scores.view(), &mask).unwrap();
        assert!((a[[0, 0]] - expect[0]).abs() < 1e-12);
        assert!((a[[0, 1]] - expect[1]).abs() < 1e-12);
        assert!((a[[0, 0]] - 0.2689).abs() < 1e-4);
        assert!((a[[0, 1]] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let scores = array![[1.0, 2.0]];
        let mask = array![[false, false]];
        assert!(matches!(
            softmax_masked(&scores.view(), &mask),
            Err(Error::FullyMaskedRow { row: 0 })
        ));
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let x: Array2<f64> = array![[1.0, 1.0, 1.0]];
        let gamma = array![1.0, 1.0, 1.0];
        let beta = array![0.0, 0.0, 0.0];
        let y = layer_norm(&x.view(), &gamma.view(), &beta.view(), 1e-5);
        for &v in y.iter() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_unit_case() {
        // mean 0, var 1 -> output equals input as eps -> 0
        let x: Array2<f64> = array![[-1.0, 1.0]];
        let gamma = array![1.0, 1.0];
        let beta = array![0.0, 0.0];
        let y = layer_norm(&x.view(), &gamma.view(), &beta.view(), 1e-12);
        assert!((y[[0, 0]] + 1.0).abs() < 1e-9);
        assert!((y[[0, 1]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn layer_norm_gamma_zero_emits_beta() {
        let x = array![[3.0, -4.0]];
        let gamma = array![0.0, 0.0];
        let beta = array![5.0, 5.0];
        let y = layer_norm(&x.view(), &gamma.view(), &beta.view(), 1e-5);
        assert_eq!(y, array![[5.0, 5.0]]);
    }

    #[test]
    fn bce_half_prediction_is_ln2() {
        let pred = array![0.5];
        let loss = bce_masked(&pred.view(), &[1], &[1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_near_zero() {
        let pred = array![1.0];
        let loss: f64 = bce_masked(&pred.view(), &[1], &[1]).unwrap();
        assert!(loss >= 0.0 && loss < 1e-6);
    }

    #[test]
    fn bce_ignores_invalid_positions() {
        let a = array![0.3, 0.9, 0.7];
        let b = array![0.3, 0.9, 0.0001];
        let l1 = bce_masked(&a.view(), &[0, 1, 1], &[1, 1, 0]).unwrap();
        let l2 = bce_masked(&b.view(), &[0, 1, 1], &[1, 1, 0]).unwrap();
        assert_eq!(l1, l2);
    }

    #[test]
    fn bce_no_valid_positions_errors() {
        let pred = array![0.5];
        assert!(matches!(
            bce_masked(&pred.view(), &[1], &[0]),
            Err(Error::NoValidPositions)
        ));
    }
}
