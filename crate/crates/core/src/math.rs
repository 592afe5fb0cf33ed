//! Float helpers backed by `libm` so the crate stays `no_std`.

pub(crate) use libm::{ceil, exp, fabs, floor, log as ln, round, sqrt, tanh};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn powi(base: f64, n: u64) -> f64 {
    libm::pow(base, n as f64)
}
