//! Tricomi's confluent hypergeometric U and the Whittaker function W_{k,m}.
//!
//! `W_{k,m}(z) = e^{-z/2} z^{m+1/2} U(m - k + 1/2, 1 + 2m, z)`, with U taken
//! from its Laplace-type integral
//! `U(a, b, z) = Γ(a)^{-1} ∫_0^∞ e^{-zt} t^{a-1} (1+t)^{b-a-1} dt`, which
//! requires `a > 0`. For the parameters produced by the colluding-eavesdropper
//! Laplace transform, `a = 1 - 2/η ∈ (0, 1)` whenever η > 2.

use super::gamma::ln_gamma_unchecked;
use super::quadrature::{integrate_semi_infinite, QuadratureSpec};
use crate::error::{Error, Result};

/// ln U(a, b, z) for a > 0, z > 0.
fn ln_u(a: f64, b: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !b.is_finite() {
        return Err(Error::Domain {
            func: "hypergeometric_u",
            detail: format!("need finite b and z > 0, got b={b}, z={z}"),
        });
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Unsupported {
            func: "hypergeometric_u",
            detail: format!("integral representation needs a > 0, got a={a}"),
        });
    }
    let c = b - a - 1.0;
    // t = τ/z pulls z^{-a} out; for a < 1 the substitution τ = w^{1/a}
    // removes the τ^{a-1} endpoint singularity.
    let (integral, ln_norm) = if a < 1.0 {
        let inv_a = 1.0 / a;
        let q = integrate_semi_infinite(
            |w| {
                let tau = w.powf(inv_a);
                (-tau + c * (tau / z).ln_1p()).exp()
            },
            spec,
        )?;
        (q.value, ln_gamma_unchecked(a + 1.0))
    } else {
        let q = integrate_semi_infinite(
            |tau| {
                if tau == 0.0 {
                    return if a == 1.0 { 1.0 } else { 0.0 };
                }
                (-tau + (a - 1.0) * tau.ln() + c * (tau / z).ln_1p()).exp()
            },
            spec,
        )?;
        (q.value, ln_gamma_unchecked(a))
    };
    if !(integral > 0.0) || !integral.is_finite() {
        return Err(Error::Numerical(format!(
            "U({a}, {b}, {z}) integral evaluated to {integral}"
        )));
    }
    Ok(integral.ln() - ln_norm - a * z.ln())
}

/// Tricomi's U(a, b, z) for a > 0 and z > 0.
pub fn hypergeometric_u(a: f64, b: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(ln_u(a, b, z, spec)?.exp())
}

fn check_whittaker(k: f64, m: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            func: "whittaker_w",
            detail: format!("z must be positive and finite, got {z}"),
        });
    }
    let a = m - k + 0.5;
    if !(a > 0.0) || !(k.is_finite() && m.is_finite()) {
        return Err(Error::Unsupported {
            func: "whittaker_w",
            detail: format!("need m - k + 1/2 > 0, got k={k}, m={m}"),
        });
    }
    Ok(a)
}

/// W_{k,m}(z) with explicit quadrature tolerances.
pub fn whittaker_w_with(k: f64, m: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    let a = check_whittaker(k, m, z)?;
    let ln_u = ln_u(a, 1.0 + 2.0 * m, z, spec)?;
    Ok((-0.5 * z + (m + 0.5) * z.ln() + ln_u).exp())
}

/// W_{k,m}(z), evaluated with tight tolerances.
pub fn whittaker_w(k: f64, m: f64, z: f64) -> Result<f64> {
    whittaker_w_with(k, m, z, &QuadratureSpec::precise())
}

/// e^{z/2} W_{k,m}(z); finite where `W` itself would underflow.
pub fn whittaker_w_scaled(k: f64, m: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    let a = check_whittaker(k, m, z)?;
    let ln_u = ln_u(a, 1.0 + 2.0 * m, z, spec)?;
    Ok(((m + 0.5) * z.ln() + ln_u).exp())
}
