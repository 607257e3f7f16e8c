//! Special functions used by the closed-form analysis.
//!
//! Every function here is pure; the only shared state is the clamp counter,
//! which records how often a computed probability had to be pulled back into
//! `[0, 1]`.

mod gamma;
mod quadrature;
mod whittaker;

use std::sync::atomic::{AtomicU64, Ordering};

pub use gamma::{
    beta_fn, gamma_fn, gamma_p, gamma_p_diff, gamma_q, ln_gamma, lower_incomplete_gamma,
    poisson_ccdf_sum,
};
pub use quadrature::{integrate, integrate_semi_infinite, QuadratureSpec, Quadrature};
pub use whittaker::{hypergeometric_u, whittaker_w, whittaker_w_scaled, whittaker_w_with};

static CLAMP_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Clamps a probability to `[0, 1]`, counting every value that needed it.
pub fn clamp_probability(p: f64) -> f64 {
    if p < 0.0 || p > 1.0 {
        CLAMP_WARNINGS.fetch_add(1, Ordering::Relaxed);
        p.clamp(0.0, 1.0)
    } else {
        p
    }
}

/// Number of probabilities clamped since process start.
pub fn clamp_warnings() -> u64 {
    CLAMP_WARNINGS.load(Ordering::Relaxed)
}
