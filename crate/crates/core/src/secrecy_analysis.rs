//! Closed-form eavesdropper statistics, delivery-time distributions and the
//! QoSec violation probability.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special_math::{clamp_probability, gamma_p_diff, ln_gamma, whittaker_w_scaled, QuadratureSpec};
use crate::system_model::{
    divisors, pr_confidential, pr_public, theta_for, Combining, DerivedConstants, EveScenario,
    ImageSpec, SystemConfig, TxParams,
};

/// Components of one QVP evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QvpBreakdown {
    pub delay_violation: f64,
    pub intercept_term: f64,
    pub qvp: f64,
    pub n_bar_bg: usize,
    pub n_tilde: usize,
    pub omega: f64,
    pub lambda: f64,
}

fn check_tx(tx: &TxParams) -> Result<()> {
    if !(tx.zeta > 0.0 && tx.zeta <= 1.0) {
        return Err(domain("secrecy_analysis", format!("zeta = {} not in (0, 1]", tx.zeta)));
    }
    if !(tx.p_s > 0.0) || !(tx.p_p > 0.0) {
        return Err(domain("secrecy_analysis", "powers must be positive"));
    }
    Ok(())
}

/// Exponent of the strongest-Eve CDF: F(omega) = exp(-nce_exponent).
fn nce_exponent(cfg: &SystemConfig, tx: &TxParams, omega: f64) -> Result<f64> {
    check_tx(tx)?;
    if !(omega > 0.0) {
        return Err(domain("nce_cdf", format!("omega must be > 0, got {omega}")));
    }
    if cfg.lambda_e == 0.0 || omega.is_infinite() {
        return Ok(0.0);
    }
    let d = DerivedConstants::new(cfg, tx, 0)?;
    let two_eta = 2.0 / cfg.eta;
    let an = if d.xi > 0.0 {
        ((1.0 - cfg.n_t as f64) * (d.xi * omega).ln_1p()).exp()
    } else {
        1.0
    };
    Ok(d.beta * cfg.lambda_e * (d.a1 / omega).powf(two_eta) * an)
}

/// CDF of the strongest non-colluding eavesdropper SINR.
pub fn nce_cdf(cfg: &SystemConfig, tx: &TxParams, omega: f64) -> Result<f64> {
    Ok((-nce_exponent(cfg, tx, omega)?).exp())
}

/// 1 - nce_cdf, without cancellation in the upper tail.
pub fn nce_ccdf(cfg: &SystemConfig, tx: &TxParams, omega: f64) -> Result<f64> {
    Ok(-(-nce_exponent(cfg, tx, omega)?).exp_m1())
}

/// Laplace transform of the summed eavesdropper SINR.
pub fn ce_laplace(cfg: &SystemConfig, tx: &TxParams, s: f64) -> Result<f64> {
    ce_laplace_with(cfg, tx, s, &QuadratureSpec::default())
}

/// [`ce_laplace`] with explicit quadrature tolerances for the Whittaker function.
pub fn ce_laplace_with(cfg: &SystemConfig, tx: &TxParams, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_tx(tx)?;
    if !(s >= 0.0) {
        return Err(domain("ce_laplace", format!("s must be >= 0, got {s}")));
    }
    if s == 0.0 || cfg.lambda_e == 0.0 {
        return Ok(1.0);
    }
    let d = DerivedConstants::new(cfg, tx, 0)?;
    let eta = cfg.eta;
    let n = cfg.n_t as f64;
    let two_pi_lambda = 2.0 * std::f64::consts::PI * cfg.lambda_e;
    let ln_beta = crate::special_math::beta_fn(2.0 / eta, 1.0 - 2.0 / eta)?.ln() - eta.ln();
    let exponent = if tx.zeta >= 1.0 {
        // No artificial noise: every Eve SINR is exponential.
        two_pi_lambda * (ln_beta + 2.0 / eta * (d.a1 * s).ln()).exp()
    } else {
        let k = (1.0 - n + 2.0 / eta) / 2.0;
        let m = (2.0 - n - 2.0 / eta) / 2.0;
        let z = d.varsigma * s;
        // e^{z/2} W_{k,m}(z), kept in scaled form to avoid overflow.
        let w = whittaker_w_scaled(k, m, z, spec)?;
        let ln_cal_b = ln_beta + (1.0 - n + 2.0 / eta) / 2.0 * d.varrho.ln();
        two_pi_lambda * (ln_cal_b + (n - 1.0 + 2.0 / eta) / 2.0 * (d.a1 * s).ln() + w.ln()).exp()
    };
    if !exponent.is_finite() {
        return Err(Error::Numerical(format!("ce_laplace exponent {exponent} at s = {s}")));
    }
    Ok((-exponent).exp())
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0).unwrap() - ln_gamma(k as f64 + 1.0).unwrap()
        - ln_gamma((n - k) as f64 + 1.0).unwrap())
    .exp()
    .round()
}

/// CCDF of the summed eavesdropper SINR, via the order-K Gamma approximation
/// of the unit step.
pub fn ce_ccdf(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, omega: f64) -> Result<f64> {
    scenario.validate()?;
    let k_terms = scenario.k_terms.max(1);
    if !(omega > 0.0) {
        return Err(domain("ce_ccdf", format!("omega must be > 0, got {omega}")));
    }
    if cfg.lambda_e == 0.0 {
        return Ok(0.0);
    }
    let d = DerivedConstants::new(cfg, tx, k_terms)?;
    let mut sum = 0.0;
    for k in 0..=k_terms {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binomial(k_terms, k) * ce_laplace(cfg, tx, k as f64 * d.varphi / omega)?;
    }
    Ok(clamp_probability(sum))
}

/// Pr(gamma_E > omega) under the given combining model.
pub fn eve_ccdf(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, omega: f64) -> Result<f64> {
    match scenario.combining {
        Combining::Nce => nce_ccdf(cfg, tx, omega),
        Combining::Ce => ce_ccdf(cfg, tx, scenario, omega),
    }
}

/// Pr(gamma_E <= omega) under the given combining model.
pub fn eve_cdf(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, omega: f64) -> Result<f64> {
    match scenario.combining {
        Combining::Nce => nce_cdf(cfg, tx, omega),
        Combining::Ce => Ok(1.0 - ce_ccdf(cfg, tx, scenario, omega)?),
    }
}

/// Distribution of the public packet count per public slot, indexed by k.
/// The support is finite because the estimated gain is capped by nu.
pub fn public_packet_pmf(cfg: &SystemConfig, tx: &TxParams) -> Result<Vec<f64>> {
    let pr0 = pr_public(cfg, tx)?;
    if !(pr0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "no public slots can occur (nu = {})",
            tx.nu
        )));
    }
    let d = DerivedConstants::new(cfg, tx, 0)?;
    let cap = d.kappa_p * tx.nu;
    let n = cfg.n_t as f64;
    let mut pmf = Vec::new();
    for k in 0.. {
        let g_l = theta_for(k, cfg.ratio_bt_b);
        if g_l >= cap {
            break;
        }
        let g_u = cap.min(theta_for(k + 1, cfg.ratio_bt_b));
        pmf.push(gamma_p_diff(n, g_l / d.kappa_p, g_u / d.kappa_p)? / pr0);
    }
    Ok(pmf)
}

/// p_bg,k: probability that a public slot carries exactly k packets.
pub fn p_bg_k(cfg: &SystemConfig, tx: &TxParams, k: usize) -> Result<f64> {
    Ok(public_packet_pmf(cfg, tx)?.get(k).copied().unwrap_or(0.0))
}

/// Mean packets per public slot.
pub fn mean_public_packets(cfg: &SystemConfig, tx: &TxParams) -> Result<f64> {
    Ok(public_packet_pmf(cfg, tx)?
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum())
}

/// ceil(n_bg / mean), the expected public-phase length.
pub fn n_bar_from_mean(n_bg: usize, mean: f64) -> Result<usize> {
    if n_bg == 0 {
        return Ok(0);
    }
    if !(mean > 0.0) {
        return Err(Error::Infeasible(format!(
            "public slots carry no packets on average ({mean}); {n_bg} public packets cannot be delivered"
        )));
    }
    let slots = (n_bg as f64 / mean).ceil();
    if !(slots < usize::MAX as f64) {
        return Err(Error::Infeasible(format!("public phase length {slots} overflows")));
    }
    Ok(slots as usize)
}

/// N_bar_bg: slots needed for the public stream at the mean per-slot rate.
pub fn n_bar_bg(cfg: &SystemConfig, tx: &TxParams, n_bg: usize) -> Result<usize> {
    if n_bg == 0 {
        return Ok(0);
    }
    let mean = match mean_public_packets(cfg, tx) {
        Ok(m) => m,
        Err(Error::Degenerate(msg)) => return Err(Error::Infeasible(msg)),
        Err(e) => return Err(e),
    };
    n_bar_from_mean(n_bg, mean)
}

/// Omega: destination outage probability of a confidential slot at rate L_s.
pub fn omega_outage(cfg: &SystemConfig, tx: &TxParams) -> Result<f64> {
    let pr1 = pr_confidential(cfg, tx)?;
    if !(pr1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "no confidential slots can occur (nu = {})",
            tx.nu
        )));
    }
    let d = DerivedConstants::new(cfg, tx, 0)?;
    if d.theta < d.kappa_s * tx.nu {
        return Ok(0.0);
    }
    let diff = gamma_p_diff(cfg.n_t as f64, tx.nu, d.theta / d.kappa_s)?;
    Ok(clamp_probability(diff / pr1))
}

/// Negative-binomial mass: probability of k failures before the m-th success
/// when each trial fails with probability p.
pub fn neg_binomial(k: usize, m: usize, p: f64) -> f64 {
    if m == 0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (kf, mf) = (k as f64, m as f64);
    let ln = ln_gamma(kf + mf).unwrap() - ln_gamma(kf + 1.0).unwrap() - ln_gamma(mf).unwrap()
        + kf * p.ln()
        + mf * (-p).ln_1p();
    ln.exp()
}

/// Parameters of the legitimate delivery-time distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryModel {
    pub n_bar_bg: usize,
    /// Confidential frames needed, N_roi / L_s.
    pub frames: usize,
    pub n_tilde: usize,
    pub omega: f64,
}

impl DeliveryModel {
    pub fn new(cfg: &SystemConfig, tx: &TxParams, img: &ImageSpec) -> Result<Self> {
        tx.check_divides(img)?;
        let n_bar_bg = n_bar_bg(cfg, tx, img.n_bg)?;
        let frames = img.n_roi / tx.l_s;
        let omega = if frames == 0 {
            0.0
        } else {
            match omega_outage(cfg, tx) {
                Ok(o) => o,
                Err(Error::Degenerate(msg)) => return Err(Error::Infeasible(msg)),
                Err(e) => return Err(e),
            }
        };
        Ok(DeliveryModel {
            n_bar_bg,
            frames,
            n_tilde: n_bar_bg + frames,
            omega,
        })
    }

    /// E[T_D]; infinite when every confidential frame is lost.
    pub fn mean(&self) -> f64 {
        if self.frames == 0 {
            self.n_tilde as f64
        } else if self.omega >= 1.0 {
            f64::INFINITY
        } else {
            self.n_tilde as f64 + self.frames as f64 * self.omega / (1.0 - self.omega)
        }
    }

    /// Pr(T_D = k).
    pub fn pmf(&self, k: usize) -> f64 {
        if k < self.n_tilde {
            0.0
        } else {
            neg_binomial(k - self.n_tilde, self.frames, self.omega)
        }
    }
}

/// PMF of the legitimate delivery time T_D.
pub fn pmf_t_d(cfg: &SystemConfig, tx: &TxParams, img: &ImageSpec, k: usize) -> Result<f64> {
    Ok(DeliveryModel::new(cfg, tx, img)?.pmf(k))
}

/// Pr(T_D > D_lim).
pub fn delay_violation(cfg: &SystemConfig, tx: &TxParams, img: &ImageSpec) -> Result<f64> {
    let model = DeliveryModel::new(cfg, tx, img)?;
    if img.d_lim < model.n_tilde {
        return Ok(1.0);
    }
    let mass: f64 = (model.n_tilde..=img.d_lim).map(|k| model.pmf(k)).sum();
    Ok(clamp_probability(1.0 - mass))
}

/// Lambda: per-slot probability that the eavesdroppers fail to obtain a
/// confidential frame (public slots count as failures).
///
/// Evaluated as 1 - Pr(Psi_1) Pr(gamma_E > theta), which equals
/// Pr(Psi_1) F(theta) + Pr(Psi_0).
pub fn lambda_slot_failure(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario) -> Result<f64> {
    Ok(clamp_probability(1.0 - intercept_probability(cfg, tx, scenario)?))
}

/// Pr(T_E <= k) given the per-slot failure probability.
fn cdf_t_e_from(frames: usize, lambda: f64, k: usize) -> f64 {
    if frames == 0 || k < frames {
        return 0.0;
    }
    let s: f64 = (frames..=k).map(|l| neg_binomial(l - frames, frames, lambda)).sum();
    clamp_probability(s)
}

/// CDF of the slot at which the eavesdroppers hold every confidential packet.
/// Zero when there are no confidential packets (nothing to intercept).
pub fn cdf_t_e(
    cfg: &SystemConfig,
    tx: &TxParams,
    img: &ImageSpec,
    scenario: &EveScenario,
    k: usize,
) -> Result<f64> {
    tx.check_divides(img)?;
    let lambda = lambda_slot_failure(cfg, tx, scenario)?;
    Ok(cdf_t_e_from(img.n_roi / tx.l_s, lambda, k))
}

fn validate_all(cfg: &SystemConfig, tx: &TxParams, img: &ImageSpec, scenario: &EveScenario) -> Result<()> {
    cfg.validate()?;
    tx.validate()?;
    img.validate()?;
    scenario.validate()?;
    tx.check_divides(img)
}

/// QVP for each deadline in `d_lims`, sharing one evaluation of the
/// distributions. Deadlines of `img` are ignored.
pub fn qvp_curve(
    cfg: &SystemConfig,
    tx: &TxParams,
    img: &ImageSpec,
    scenario: &EveScenario,
    d_lims: &[usize],
) -> Result<Vec<QvpBreakdown>> {
    validate_all(cfg, tx, img, scenario)?;
    let model = DeliveryModel::new(cfg, tx, img)?;
    let lambda = lambda_slot_failure(cfg, tx, scenario)?;
    let top = d_lims.iter().copied().max().unwrap_or(0);
    // Prefix sums of Pr(T_D = k) and Pr(T_D = k) Pr(T_E <= k).
    let mut mass = vec![0.0; top + 2];
    let mut joint = vec![0.0; top + 2];
    let mut te_cdf = 0.0;
    for k in 0..=top {
        let pd = model.pmf(k);
        if model.frames > 0 && k >= model.frames {
            te_cdf += neg_binomial(k - model.frames, model.frames, lambda);
        }
        mass[k + 1] = mass[k] + pd;
        joint[k + 1] = joint[k] + pd * te_cdf.min(1.0);
    }
    Ok(d_lims
        .iter()
        .map(|&d| {
            let (delay, intercept) = if d < model.n_tilde {
                (1.0, 0.0)
            } else {
                (clamp_probability(1.0 - mass[d + 1]), clamp_probability(joint[d + 1]))
            };
            QvpBreakdown {
                delay_violation: delay,
                intercept_term: intercept,
                qvp: clamp_probability(delay + intercept),
                n_bar_bg: model.n_bar_bg,
                n_tilde: model.n_tilde,
                omega: model.omega,
                lambda,
            }
        })
        .collect())
}

/// QoSec violation probability: Pr(T_D > D_lim) + Pr(T_E <= T_D <= D_lim).
pub fn qvp(cfg: &SystemConfig, tx: &TxParams, img: &ImageSpec, scenario: &EveScenario) -> Result<QvpBreakdown> {
    Ok(qvp_curve(cfg, tx, img, scenario, &[img.d_lim])?[0])
}

/// Per-frame intercept probability Pr(Psi_1) Pr(gamma_E > theta).
pub fn intercept_probability(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario) -> Result<f64> {
    let pr1 = pr_confidential(cfg, tx)?;
    if pr1 == 0.0 || cfg.lambda_e == 0.0 {
        return Ok(0.0);
    }
    let theta = theta_for(tx.l_s, cfg.ratio_bt_b);
    Ok(clamp_probability(pr1 * eve_ccdf(cfg, tx, scenario, theta)?))
}

/// Smallest SINR threshold omega with Pr(gamma_E > omega) <= target, by
/// bisection in log(omega) to relative tolerance `tol`.
fn eve_quantile(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, target: f64, tol: f64) -> Result<f64> {
    let ccdf = |w: f64| eve_ccdf(cfg, tx, scenario, w);
    let mut lo = 1e-12;
    if ccdf(lo)? <= target {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while ccdf(hi)? > target {
        lo = hi;
        hi *= 4.0;
        if hi > 1e300 {
            return Err(Error::Numerical("eavesdropper quantile bracket diverged".into()));
        }
    }
    while hi - lo > tol * hi {
        let mid = (lo * hi).sqrt();
        if ccdf(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Lower bound on L_s (real-valued) from the per-frame intercept constraint.
/// Zero when the constraint is vacuous.
pub fn min_ls_bound(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, eps_ip: f64) -> Result<f64> {
    if !(eps_ip > 0.0 && eps_ip < 1.0) {
        return Err(domain("min_secure_ls", format!("eps_ip = {eps_ip} not in (0, 1)")));
    }
    let pr1 = pr_confidential(cfg, tx)?;
    if eps_ip >= pr1 || cfg.lambda_e == 0.0 {
        return Ok(0.0);
    }
    let w = eve_quantile(cfg, tx, scenario, eps_ip / pr1, 1e-8)?;
    Ok(cfg.ratio_bt_b * w.ln_1p() / std::f64::consts::LN_2)
}

/// Smallest divisor of `n_roi` whose frame rate keeps the intercept
/// probability at or below `eps_ip`. `tx.l_s` is ignored.
pub fn min_secure_ls(
    cfg: &SystemConfig,
    tx: &TxParams,
    scenario: &EveScenario,
    eps_ip: f64,
    n_roi: usize,
) -> Result<usize> {
    let bound = min_ls_bound(cfg, tx, scenario, eps_ip)?;
    let divs = divisors(n_roi);
    for &l in divs.iter().filter(|&&l| l as f64 >= bound) {
        let cand = TxParams { l_s: l, ..*tx };
        // The bisection tolerance can leave the boundary divisor a hair short.
        if intercept_probability(cfg, &cand, scenario)? <= eps_ip {
            return Ok(l);
        }
    }
    Err(Error::Infeasible(format!(
        "no divisor of n_roi = {n_roi} satisfies L_s >= {bound:.6} (eps_ip = {eps_ip})"
    )))
}
