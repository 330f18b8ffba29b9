//! Central finite-difference verification of analytic gradients.
//!
//! Intended for miniature 64-bit models: the loss closure is re-evaluated
//! twice per parameter scalar, so keep parameter counts in the thousands.

use crate::params::{ParamId, ParamStore};
use ndarray::ArrayD;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Base step; the actual step is `step * max(1, |x|)`.
    pub step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            rel_tol: 1e-4,
            abs_tol: 1e-7,
            step: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckFailure {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `analytic` gradients against central finite differences of
/// `loss` for every scalar of every listed parameter. `loss` must be a pure,
/// deterministic function of the store (fix all seeds and data outside).
pub fn finite_difference_check<F>(
    store: &mut ParamStore<f64>,
    analytic: &[(ParamId, ArrayD<f64>)],
    mut loss: F,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let mut report = GradCheckReport::default();
    for (pid, grad) in analytic {
        let n = store.value(*pid).len();
        assert_eq!(grad.len(), n, "analytic gradient shape mismatch");
        let name = store.name(*pid).to_string();
        for j in 0..n {
            let x0 = store.value(*pid).as_slice().unwrap()[j];
            let h = cfg.step * x0.abs().max(1.0);
            store.value_mut(*pid).as_slice_mut().unwrap()[j] = x0 + h;
            let f_plus = loss(store);
            store.value_mut(*pid).as_slice_mut().unwrap()[j] = x0 - h;
            let f_minus = loss(store);
            store.value_mut(*pid).as_slice_mut().unwrap()[j] = x0;

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = grad.as_slice().unwrap()[j];
            let denom = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            let rel = if denom > 0.0 { err / denom } else { 0.0 };
            report.checked += 1;
            if rel > report.max_rel_err && err > cfg.abs_tol {
                report.max_rel_err = rel;
            }
            if err > cfg.abs_tol + cfg.rel_tol * denom {
                report.failures.push(GradCheckFailure {
                    param: name.clone(),
                    index: j,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    report
}
