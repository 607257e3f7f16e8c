//! Test-only oracles. Nothing here calls into the crate's quadrature.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Double-exponential (exp-sinh) quadrature on [0, inf).
///
/// x = exp(pi/2 sinh t); the step is halved until two levels agree to `rel`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, rel: f64) -> f64 {
    let term = |t: f64| {
        let x = (FRAC_PI_2 * t.sinh()).exp();
        let w = x * FRAC_PI_2 * t.cosh();
        if x == 0.0 || !x.is_finite() || !w.is_finite() {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += term(k as f64 * h) + term(-(k as f64) * h);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            sum += term(k as f64 * h) + term(-(k as f64) * h);
            k += 2;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= rel * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Tanh-sinh quadrature on the finite interval [a, b].
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let x = u.tanh();
        let w = FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
        let p = c + r * x;
        if w == 0.0 || p <= a || p >= b {
            return 0.0;
        }
        let v = f(p) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += term(k as f64 * h) + term(-(k as f64) * h);
        k += 1;
    }
    let mut prev = sum * h * r;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            sum += term(k as f64 * h) + term(-(k as f64) * h);
            k += 2;
        }
        let cur = sum * h * r;
        if (cur - prev).abs() <= rel * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// ln Gamma via Stirling with shift; independent of the crate's Lanczos.
pub fn ln_gamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 15.0 {
        acc -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    acc + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
        - 1.0 / (1680.0 * x2 * x2 * x2 * x)
}

/// W_{k,m}(z) through Kummer's transformation U(a,b,z) = z^{1-b} U(a-b+1, 2-b, z)
/// and the Laplace integral of the transformed U. Needs a - b + 1 > 0.
pub fn whittaker_oracle(k: f64, m: f64, z: f64) -> f64 {
    let a = m - k + 0.5;
    let b = 1.0 + 2.0 * m;
    let a2 = a - b + 1.0;
    let b2 = 2.0 - b;
    assert!(a2 > 0.0, "oracle needs a - b + 1 > 0");
    let c = b2 - a2 - 1.0;
    // Integrate in tau = z t to keep the peak near 1.
    let i = exp_sinh(
        |tau| (-tau + (a2 - 1.0) * tau.ln() + c * (tau / z).ln_1p()).exp(),
        1e-13,
    );
    let ln_u2 = i.ln() - a2 * z.ln() - ln_gamma(a2);
    (-0.5 * z + (m + 0.5) * z.ln() + (1.0 - b) * z.ln() + ln_u2).exp()
}

/// Laplace transform of the summed Eve SINR from its defining double
/// integral: exp(-2 pi lambda E_v[ int_0^inf r (1 - E_u e^{-s gamma(r)}) dr ]).
///
/// `a1 = zeta P_s/sigma`, `a2 = (1-zeta) P_s/(sigma (n_t-1))`. The average over
/// u ~ Exp(1) is done in closed form; r and v by nested quadrature.
pub fn laplace_oracle(lambda: f64, eta: f64, n_t: usize, a1: f64, a2: f64, s: f64) -> f64 {
    let shape = n_t as f64 - 1.0;
    let ln_gv = ln_gamma(shape);
    let inner = |v: f64| {
        exp_sinh(
            |r| {
                let rp = r.powf(eta);
                // 1 - E_u exp(-s a1 u/(a2 v + r^eta))
                let x = s * a1 / (a2 * v + rp);
                r * x / (1.0 + x)
            },
            1e-10,
        )
    };
    let outer = exp_sinh(
        |v| {
            let dens = ((shape - 1.0) * v.ln() - v - ln_gv).exp();
            dens * inner(v)
        },
        1e-9,
    );
    (-2.0 * std::f64::consts::PI * lambda * outer).exp()
}

/// Max deviation between an empirical CDF (sorted samples) and `cdf` at `grid`.
pub fn ecdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}
