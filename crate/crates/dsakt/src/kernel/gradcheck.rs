//! Central-difference gradient checking. The harness is the arbiter for every
//! hand-derived backward pass in this crate: it never calls any backward code
//! itself, only the forward loss, so the two routes stay independent.

use crate::error::{Error, Result};

/// Anything that exposes its learnable tensors as named flat slices.
/// Iteration order must be stable; it defines the canonical tensor directory.
pub trait ParamTensors<F> {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[F])>;
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [F])>;
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Relative error |a - b| / max(|a|, |b|, 1e-8).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs())).max(1e-8)
}

/// Compare `analytic` gradients against central finite differences of `loss`
/// around the current value of `params`. Runs in 64-bit.
///
/// The per-parameter error is |g_an - g_fd| relative to the parameter's
/// gradient magnitude: max_i |g_an_i - g_fd_i| / max(||g_an||_inf,
/// ||g_fd||_inf, 1e-8), maximized over the parameter's elements. Scaling by
/// the per-element magnitude instead would make the check fail on any
/// element whose true gradient sits below the finite-difference noise floor
/// (about |loss| * eps / step), regardless of how exact the backward pass is.
pub fn grad_check<T, L>(
    params: &mut T,
    analytic: &T,
    mut loss: L,
    fd_step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    T: ParamTensors<f64>,
    L: FnMut(&T) -> Result<f64>,
{
    let layout: Vec<(String, usize)> = params
        .named_tensors()
        .into_iter()
        .map(|(name, _, data)| (name, data.len()))
        .collect();
    let grads: Vec<Vec<f64>> = analytic
        .named_tensors()
        .into_iter()
        .map(|(_, _, data)| data.to_vec())
        .collect();
    debug_assert_eq!(layout.len(), grads.len());

    let mut entries = Vec::with_capacity(layout.len());
    for (ti, (name, len)) in layout.iter().enumerate() {
        let mut max_abs_diff = 0.0f64;
        let mut an_scale = 0.0f64;
        let mut fd_scale = 0.0f64;
        for ei in 0..*len {
            let g_an = grads[ti][ei];
            if !g_an.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
            let old = params.named_tensors_mut()[ti].1[ei];
            params.named_tensors_mut()[ti].1[ei] = old + fd_step;
            let lp = loss(params)?;
            params.named_tensors_mut()[ti].1[ei] = old - fd_step;
            let lm = loss(params)?;
            params.named_tensors_mut()[ti].1[ei] = old;
            if !lp.is_finite() || !lm.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
            let g_fd = (lp - lm) / (2.0 * fd_step);
            max_abs_diff = max_abs_diff.max((g_an - g_fd).abs());
            an_scale = an_scale.max(g_an.abs());
            fd_scale = fd_scale.max(g_fd.abs());
        }
        entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_err: max_abs_diff / an_scale.max(fd_scale).max(1e-8),
        });
    }
    let pass = entries.iter().all(|e| e.max_rel_err < tolerance);
    Ok(GradCheckReport {
        entries,
        tolerance,
        pass,
    })
}

/// Single named flat tensor; convenient for kernel-level checks.
pub struct FlatParams {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensors<f64> for FlatParams {
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        vec![(self.name.clone(), self.shape.clone(), &self.data)]
    }
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![(self.name.clone(), &mut self.data)]
    }
}
