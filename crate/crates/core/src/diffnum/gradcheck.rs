use alloc::format;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Compares the reverse-mode gradient of `f` at `x` against central
/// differences.
///
/// Returns `max_i |analytic_i − numeric_i| / max(1, |numeric_i|)`. `f` must
/// be deterministic; it is re-run on a fresh tape for every perturbation.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let loss = f(&mut tape, xv)?;
    let base = tape.value(loss).item();
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("f(x) = {base}")));
    }
    let grads = tape.backward(loss)?;
    let analytic = grads.get_or_zeros(&tape, xv);

    let eval = |probe: Tensor| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.constant(probe);
        let out = f(&mut t, v)?;
        t.value(out).data().first().copied().ok_or(Error::NonScalarLoss(alloc::vec![0]))
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let (fp, fm) = (eval(plus)?, eval(minus)?);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("f(x ± eps) at coordinate {i}")));
        }
        let numeric = (fp - fm) / (2.0 * eps);
        let err = math::fabs(analytic[i] - numeric) / math::fabs(numeric).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
