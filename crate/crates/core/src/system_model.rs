//! Scenario and decision types, channel sampling, beamformer construction and
//! the destination/eavesdropper SINR expressions.
//!
//! Powers are stored in linear watts; every formula consumes them through the
//! ratio `P / sigma_n`. Decibels never appear below the CLI.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_math::{beta_fn, gamma_fn, gamma_p, gamma_q, ln_gamma, poisson_ccdf_sum};

/// Static wireless scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Transmit antennas at the source.
    pub n_t: usize,
    /// Path-loss exponent, > 2.
    pub eta: f64,
    /// Eavesdropper density (nodes per unit area).
    pub lambda_e: f64,
    /// Symbols-per-packet ratio BT/b.
    pub ratio_bt_b: f64,
    /// Noise power (linear).
    pub sigma_n: f64,
    /// Source-destination distance.
    pub r_d: f64,
    /// Correlation between the true and estimated legitimate channel, in (0, 1].
    pub rho: f64,
    /// Lower bound on P/sigma_n (linear).
    pub gamma_min: f64,
    /// Upper bound on P/sigma_n (linear).
    pub gamma_max: f64,
}

impl SystemConfig {
    /// Evaluation setting: 8 antennas, eta = 4, lambda_E = 0.2, BT/b = 50/8,
    /// destination at (2, -2), rho = 0.95, transmit SNR range 10-30 dB.
    pub fn reference() -> Self {
        SystemConfig {
            n_t: 8,
            eta: 4.0,
            lambda_e: 0.2,
            ratio_bt_b: 50.0 / 8.0,
            sigma_n: 1.0,
            r_d: 8.0f64.sqrt(),
            rho: 0.95,
            gamma_min: 10.0,
            gamma_max: 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.n_t < 2 {
            return bad("n_t must be at least 2");
        }
        if !(self.eta > 2.0) || !self.eta.is_finite() {
            return bad("eta must be finite and > 2");
        }
        if !(self.lambda_e >= 0.0) || !self.lambda_e.is_finite() {
            return bad("lambda_e must be finite and >= 0");
        }
        if !(self.ratio_bt_b > 0.0) || !self.ratio_bt_b.is_finite() {
            return bad("ratio_bt_b must be finite and > 0");
        }
        if !(self.sigma_n > 0.0) || !self.sigma_n.is_finite() {
            return bad("sigma_n must be finite and > 0");
        }
        if !(self.r_d > 0.0) || !self.r_d.is_finite() {
            return bad("r_d must be finite and > 0");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.gamma_min > 0.0 && self.gamma_min < self.gamma_max) || !self.gamma_max.is_finite()
        {
            return bad("need 0 < gamma_min < gamma_max < inf");
        }
        Ok(())
    }

    /// r_D^eta * sigma_n, the noise term of the destination SINR.
    pub fn path_noise(&self) -> f64 {
        self.r_d.powf(self.eta) * self.sigma_n
    }
}

/// Transmission decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxParams {
    /// Fraction of confidential power on the information beam, in (0, 1].
    pub zeta: f64,
    /// Public transmit power (linear).
    pub p_p: f64,
    /// Confidential transmit power (linear).
    pub p_s: f64,
    /// Threshold on the estimated gain selecting confidential slots.
    pub nu: f64,
    /// Confidential packets per frame.
    pub l_s: usize,
}

impl TxParams {
    /// Basic domain checks; power bounds are checked by [`TxParams::check_bounds`].
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return bad("zeta must lie in (0, 1]");
        }
        if !(self.p_p > 0.0) || !self.p_p.is_finite() || !(self.p_s > 0.0) || !self.p_s.is_finite()
        {
            return bad("powers must be finite and > 0");
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad("nu must be finite and >= 0");
        }
        if self.l_s == 0 {
            return bad("l_s must be at least 1");
        }
        Ok(())
    }

    /// The SNR box `gamma_min < P/sigma_n <= gamma_max` for both powers.
    pub fn check_bounds(&self, cfg: &SystemConfig) -> Result<()> {
        for (name, p) in [("p_p", self.p_p), ("p_s", self.p_s)] {
            let snr = p / cfg.sigma_n;
            if !(snr > cfg.gamma_min && snr <= cfg.gamma_max) {
                return Err(Error::InvalidConfig(format!(
                    "{name}/sigma_n = {snr} outside ({}, {}]",
                    cfg.gamma_min, cfg.gamma_max
                )));
            }
        }
        Ok(())
    }

    /// Checks that `l_s` divides the confidential packet count.
    pub fn check_divides(&self, img: &ImageSpec) -> Result<()> {
        if self.l_s == 0 || img.n_roi % self.l_s != 0 {
            return Err(Error::Contract(format!(
                "l_s = {} does not divide n_roi = {}",
                self.l_s, img.n_roi
            )));
        }
        Ok(())
    }
}

/// Packet counts and deadline of one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSpec {
    pub n_roi: usize,
    pub n_bg: usize,
    pub d_lim: usize,
}

impl ImageSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_roi + self.n_bg == 0 {
            return Err(Error::InvalidConfig("n_roi + n_bg must be at least 1".into()));
        }
        if self.d_lim == 0 {
            return Err(Error::InvalidConfig("d_lim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sorted divisors of `n` (empty for `n == 0`).
pub fn divisors(n: usize) -> Vec<usize> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            lo.push(d);
            if d * d != n {
                hi.push(n / d);
            }
        }
        d += 1;
    }
    lo.extend(hi.into_iter().rev());
    lo
}

/// How the eavesdroppers combine what they receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combining {
    /// Non-colluding: the strongest single Eve decides.
    Nce,
    /// Colluding: SINRs add up.
    Ce,
}

impl std::fmt::Display for Combining {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Combining::Nce => "nce",
            Combining::Ce => "ce",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveScenario {
    pub combining: Combining,
    /// Order of the CE CCDF approximation.
    pub k_terms: usize,
}

impl EveScenario {
    pub const DEFAULT_K: usize = 10;

    pub fn nce() -> Self {
        EveScenario {
            combining: Combining::Nce,
            k_terms: Self::DEFAULT_K,
        }
    }

    pub fn ce() -> Self {
        EveScenario {
            combining: Combining::Ce,
            k_terms: Self::DEFAULT_K,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.combining == Combining::Ce && self.k_terms < 5 {
            return Err(Error::InvalidConfig(format!(
                "k_terms must be >= 5 for colluding eavesdroppers, got {}",
                self.k_terms
            )));
        }
        if self.k_terms > 170 {
            return Err(Error::InvalidConfig("k_terms must be <= 170".into()));
        }
        Ok(())
    }
}

impl Default for EveScenario {
    fn default() -> Self {
        Self::nce()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Public,
    Confidential,
}

/// Constants shared by the closed forms.
///
/// With `zeta = 1` there is no artificial noise: `xi` and `varrho` are 0 and
/// `varsigma`, `cal_b` are `+inf`; the CE Laplace transform switches to its
/// no-AN limit in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub beta: f64,
    pub xi: f64,
    pub a1: f64,
    pub varrho: f64,
    pub varsigma: f64,
    pub cal_b: f64,
    pub kappa_p: f64,
    pub kappa_s: f64,
    pub theta: f64,
    pub varphi: f64,
}

impl DerivedConstants {
    pub fn new(cfg: &SystemConfig, tx: &TxParams, k_terms: usize) -> Result<Self> {
        let n = cfg.n_t as f64;
        let eta = cfg.eta;
        let snr_s = tx.p_s / cfg.sigma_n;
        let beta = std::f64::consts::PI * gamma_fn(1.0 + 2.0 / eta)?;
        let a1 = tx.zeta * snr_s;
        let (xi, varrho, varsigma, cal_b) = if tx.zeta < 1.0 {
            let varrho = (1.0 - tx.zeta) * snr_s / (n - 1.0);
            let varsigma = tx.zeta * (n - 1.0) / (1.0 - tx.zeta);
            let cal_b = beta_fn(2.0 / eta, 1.0 - 2.0 / eta)? / eta
                * varrho.powf((1.0 - n + 2.0 / eta) / 2.0);
            ((1.0 / tx.zeta - 1.0) / (n - 1.0), varrho, varsigma, cal_b)
        } else {
            (0.0, 0.0, f64::INFINITY, f64::INFINITY)
        };
        let interf = |p: f64| (1.0 - cfg.rho * cfg.rho) * p + cfg.path_noise();
        let kappa_p = cfg.rho * cfg.rho * tx.p_p / interf(tx.p_p);
        let kappa_s = cfg.rho * cfg.rho * tx.zeta * tx.p_s / interf(tx.p_s);
        let theta = theta_for(tx.l_s, cfg.ratio_bt_b);
        let varphi = if k_terms == 0 {
            0.0
        } else {
            let k = k_terms as f64;
            k / (ln_gamma(k + 1.0)? / k).exp()
        };
        Ok(DerivedConstants {
            beta,
            xi,
            a1,
            varrho,
            varsigma,
            cal_b,
            kappa_p,
            kappa_s,
            theta,
            varphi,
        })
    }
}

/// SINR threshold for decoding `l` packets in one slot: 2^{l / (BT/b)} - 1.
pub fn theta_for(l: usize, ratio_bt_b: f64) -> f64 {
    (l as f64 / ratio_bt_b).exp2() - 1.0
}

/// Pr(Psi_1): probability that a slot carries confidential data, Pr(g_hat > nu).
pub fn pr_confidential(cfg: &SystemConfig, tx: &TxParams) -> Result<f64> {
    poisson_ccdf_sum(cfg.n_t, tx.nu)
}

/// Pr(Psi_0) = Pr(g_hat <= nu), evaluated directly rather than as
/// 1 - Pr(Psi_1) so small values keep their relative precision.
pub fn pr_public(cfg: &SystemConfig, tx: &TxParams) -> Result<f64> {
    gamma_p(cfg.n_t as f64, tx.nu)
}

/// Draws an estimated legitimate channel with i.i.d. CN(0, 1) entries.
pub fn sample_channel<R: Rng + ?Sized>(n_t: usize, rng: &mut R) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n_t)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// g_hat = ||h_hat||^2 for a fresh CN(0, I) channel; Gamma(n_t, 1) distributed.
pub fn sample_estimated_gain<R: Rng + ?Sized>(n_t: usize, rng: &mut R) -> f64 {
    (0..n_t)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            0.5 * (re * re + im * im)
        })
        .sum()
}

/// Destination SINR with channel-estimation error folded into the interference.
pub fn sinr_destination(cfg: &SystemConfig, tx: &TxParams, g_hat: f64, kind: FrameKind) -> f64 {
    let rho2 = cfg.rho * cfg.rho;
    match kind {
        FrameKind::Public => {
            rho2 * tx.p_p * g_hat / ((1.0 - rho2) * tx.p_p + cfg.path_noise())
        }
        FrameKind::Confidential => {
            tx.zeta * rho2 * tx.p_s * g_hat / ((1.0 - rho2) * tx.p_s + cfg.path_noise())
        }
    }
}

/// Public packets deliverable in one slot: floor((BT/b) log2(1 + gamma_D^p)).
pub fn public_packets(cfg: &SystemConfig, gamma: f64) -> usize {
    let l = (cfg.ratio_bt_b * gamma.ln_1p() / std::f64::consts::LN_2).floor();
    if l > 0.0 {
        l as usize
    } else {
        0
    }
}

/// MRT beam and an orthonormal basis of the artificial-noise subspace.
///
/// `w = conj(h_hat)/||h_hat||`, so the destination sees `h_hat^T w = ||h_hat||`.
/// The columns of `G` span the orthogonal complement of `w` (`w^H G = 0`), which
/// is the null space of `h_hat^T`: the noise never reaches the destination
/// through the estimated channel.
pub fn build_beamformers(h_hat: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let n = h_hat.len();
    let norm = h_hat.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n == 0 || !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate(
            "beamformer needs a nonzero, finite channel vector".into(),
        ));
    }
    let w: Vec<Complex64> = h_hat.iter().map(|c| c.conj() / norm).collect();

    // Modified Gram-Schmidt (two passes) over the standard basis, weakest
    // overlap with w first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[a].norm_sqr().total_cmp(&w[b].norm_sqr()));
    let mut basis: Vec<Vec<Complex64>> = vec![w.clone()];
    for &j in &order {
        if basis.len() == n {
            break;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[j] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for q in &basis {
                let proj: Complex64 = q.iter().zip(&v).map(|(qi, vi)| qi.conj() * vi).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let vn = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vn > 1e-6 {
            basis.push(v.into_iter().map(|c| c / vn).collect());
        }
    }
    // Columns of G, each of length n.
    let g = basis.split_off(1);
    Ok((w, g))
}

/// Samples eavesdropper SINRs for confidential frames.
///
/// Per Eve: u ~ Exp(1) is the power along the information beam and
/// v ~ Gamma(n_T - 1, 1) the power in the noise subspace, giving
/// `gamma = a1 r^-eta u / (varrho v r^-eta + 1)`.
#[derive(Debug, Clone)]
pub struct EveSampler {
    a1: f64,
    varrho: f64,
    eta: f64,
    lambda_e: f64,
    an_dims: f64,
    an_power: Gamma<f64>,
}

impl EveSampler {
    pub fn new(cfg: &SystemConfig, tx: &TxParams) -> Result<Self> {
        let snr_s = tx.p_s / cfg.sigma_n;
        let n = cfg.n_t as f64;
        let an_power = Gamma::new(n - 1.0, 1.0)
            .map_err(|e| Error::InvalidConfig(format!("AN power distribution: {e}")))?;
        Ok(EveSampler {
            a1: tx.zeta * snr_s,
            varrho: (1.0 - tx.zeta) * snr_s / (n - 1.0),
            eta: cfg.eta,
            lambda_e: cfg.lambda_e,
            an_dims: n - 1.0,
            an_power,
        })
    }

    /// PPP realisation on the disc of radius `r_max`, as distances from the source.
    pub fn sample_radii<R: Rng + ?Sized>(&self, r_max: f64, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        let count = self.sample_count(r_max, rng);
        out.extend((0..count).map(|_| r_max * rng.random::<f64>().sqrt()));
    }

    /// One Eve's SINR at distance `r` with fresh small-scale fading.
    pub fn sinr_at<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Exp1);
        let v = if self.varrho > 0.0 {
            self.an_power.sample(rng)
        } else {
            0.0
        };
        let pl = r.powf(-self.eta);
        self.a1 * pl * u / (self.varrho * v * pl + 1.0)
    }

    /// Number of Eves on the disc of radius `r_max` for one realisation.
    pub fn sample_count<R: Rng + ?Sized>(&self, r_max: f64, rng: &mut R) -> usize {
        let mean = self.lambda_e * std::f64::consts::PI * r_max * r_max;
        if !(mean > 0.0) {
            return 0;
        }
        Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0) as usize
    }

    /// Whether an Eve at distance `r` beats `threshold` with fresh fading.
    ///
    /// Draws the beam power first and skips the noise-subspace draw when even
    /// the noise-free SINR stays below the threshold.
    pub fn sinr_exceeds<R: Rng + ?Sized>(&self, r: f64, threshold: f64, rng: &mut R) -> bool {
        let u: f64 = rng.sample(Exp1);
        let pl = r.powf(-self.eta);
        let clean = self.a1 * pl * u;
        if clean <= threshold {
            return false;
        }
        if self.varrho == 0.0 {
            return true;
        }
        let v = self.an_power.sample(rng);
        clean / (self.varrho * v * pl + 1.0) > threshold
    }

    /// Fresh PPP on the disc plus fading; one SINR per Eve.
    pub fn sample_sinrs<R: Rng + ?Sized>(&self, r_max: f64, rng: &mut R) -> Vec<f64> {
        let mut radii = Vec::new();
        self.sample_radii(r_max, rng, &mut radii);
        radii.iter().map(|&r| self.sinr_at(r, rng)).collect()
    }

    /// Expected total SINR of Eves beyond `r` (far-field, first order in r^-eta).
    pub fn far_field_mean(&self, r: f64) -> f64 {
        let eta = self.eta;
        let n1 = self.an_dims;
        2.0 * std::f64::consts::PI
            * self.lambda_e
            * self.a1
            * (r.powf(2.0 - eta) / (eta - 2.0)
                - self.varrho * n1 * r.powf(2.0 - 2.0 * eta) / (2.0 * eta - 2.0))
    }

    /// Standard deviation of the total SINR of Eves beyond `r` (leading order).
    pub fn far_field_std(&self, r: f64) -> f64 {
        let eta = self.eta;
        (2.0 * std::f64::consts::PI * self.lambda_e * self.a1 * self.a1 * 2.0
            * r.powf(2.0 - 2.0 * eta)
            / (2.0 * eta - 2.0))
            .sqrt()
    }
}

/// Sample the eavesdropper SINRs of one confidential slot.
pub fn sample_eve_sinrs<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    tx: &TxParams,
    r_max: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(r_max > 0.0) {
        return Err(crate::error::domain("sample_eve_sinrs", format!("r_max = {r_max}")));
    }
    Ok(EveSampler::new(cfg, tx)?.sample_sinrs(r_max, rng))
}

/// Truncation radius for the strongest-Eve statistic at thresholds >= `omega_ref`:
/// the share of the NCE CDF exponent contributed by radii beyond it is <= `tail`.
///
/// That share is Q(2/eta, omega_ref R^eta / a1), independent of the AN term.
pub fn auto_r_max_nce(cfg: &SystemConfig, tx: &TxParams, omega_ref: f64, tail: f64) -> Result<f64> {
    let a1 = tx.zeta * tx.p_s / cfg.sigma_n;
    let s = 2.0 / cfg.eta;
    if !(omega_ref > 0.0) || !(tail > 0.0 && tail < 1.0) {
        return Err(crate::error::domain(
            "auto_r_max_nce",
            format!("omega_ref = {omega_ref}, tail = {tail}"),
        ));
    }
    // Q(s, x) is decreasing in x: bracket then bisect.
    let mut hi = 1.0;
    while gamma_q(s, hi)? > tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_q(s, mid)? > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi * a1 / omega_ref).powf(1.0 / cfg.eta))
}

/// Truncation radius for the summed-SINR statistic: the standard deviation of
/// the neglected far field is at most `rel_std * omega_ref`. Its mean is added
/// back by the simulator through [`EveSampler::far_field_mean`].
pub fn auto_r_max_ce(cfg: &SystemConfig, tx: &TxParams, omega_ref: f64, rel_std: f64) -> Result<f64> {
    if !(omega_ref > 0.0) || !(rel_std > 0.0) {
        return Err(crate::error::domain(
            "auto_r_max_ce",
            format!("omega_ref = {omega_ref}, rel_std = {rel_std}"),
        ));
    }
    let s = EveSampler::new(cfg, tx)?;
    let target = rel_std * omega_ref;
    // std(R) = std(1) * R^{1-eta}
    let std1 = s.far_field_std(1.0);
    Ok((std1 / target).powf(1.0 / (cfg.eta - 1.0)).max(1.0))
}
