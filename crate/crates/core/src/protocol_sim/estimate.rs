//! Parallel Monte Carlo estimators built on the slot simulator.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{
    simulate_delivery, simulate_eve_capture, trial_rng, DeliveryOutcome, EveMode, SimSettings,
    SlotContext,
};
use crate::error::{Error, Result};
use crate::system_model::{
    public_packets, sample_estimated_gain, sinr_destination, EveScenario, FrameKind, ImageSpec,
    SystemConfig, TxParams,
};

/// A Monte Carlo probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(hits: usize, trials: usize, seed: u64) -> Self {
        let value = hits as f64 / trials as f64;
        McEstimate {
            value,
            std_err: (value * (1.0 - value) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    Ok(())
}

/// Runs `trials` independent deliveries. Trial `i` uses stream `i` of `seed`,
/// so the result does not depend on the worker count.
pub fn simulate_trials(
    cfg: &SystemConfig,
    tx: &TxParams,
    img: &ImageSpec,
    scenario: &EveScenario,
    settings: &SimSettings,
    trials: usize,
    seed: u64,
) -> Result<Vec<DeliveryOutcome>> {
    check_trials(trials)?;
    img.validate()?;
    tx.check_divides(img)?;
    let ctx = SlotContext::new(cfg, tx, scenario, settings)?;
    (0..trials)
        .into_par_iter()
        .map(|i| simulate_delivery(&ctx, img, settings, &mut trial_rng(seed, i as u64)))
        .collect()
}

/// Empirical QVP at deadline `img.d_lim`.
pub fn estimate_qvp(
    cfg: &SystemConfig,
    tx: &TxParams,
    img: &ImageSpec,
    scenario: &EveScenario,
    trials: usize,
    seed: u64,
    settings: &SimSettings,
) -> Result<McEstimate> {
    let out = simulate_trials(cfg, tx, img, scenario, settings, trials, seed)?;
    let hits = out.iter().filter(|o| o.violates(img.d_lim)).count();
    Ok(McEstimate::from_counts(hits, trials, seed))
}

/// Empirical QVP for every deadline in `d_lims` (each must not exceed the
/// simulated horizon).
pub fn qvp_curve_from(outcomes: &[DeliveryOutcome], d_lims: &[usize], seed: u64) -> Result<Vec<McEstimate>> {
    check_trials(outcomes.len())?;
    d_lims
        .iter()
        .map(|&d| {
            if outcomes.iter().any(|o| o.t_d.is_none() && o.horizon < d) {
                return Err(Error::Contract(format!(
                    "deadline {d} lies beyond the simulated horizon"
                )));
            }
            let hits = outcomes.iter().filter(|o| o.violates(d)).count();
            Ok(McEstimate::from_counts(hits, outcomes.len(), seed))
        })
        .collect()
}

/// Empirical file-intercept probability (second QVP term) at deadline `d`.
pub fn fip_from(outcomes: &[DeliveryOutcome], d: usize, seed: u64) -> McEstimate {
    let hits = outcomes
        .iter()
        .filter(|o| o.t_d.is_some_and(|t| t <= d) && o.intercepted_by(d))
        .count();
    McEstimate::from_counts(hits, outcomes.len().max(1), seed)
}

/// T_E samples of the uncensored eavesdropper process.
pub fn sample_eve_capture_times(
    cfg: &SystemConfig,
    tx: &TxParams,
    img: &ImageSpec,
    scenario: &EveScenario,
    settings: &SimSettings,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Option<usize>>> {
    check_trials(trials)?;
    let ctx = SlotContext::new(cfg, tx, scenario, settings)?;
    Ok((0..trials)
        .into_par_iter()
        .map(|i| simulate_eve_capture(&ctx, img, horizon, &mut trial_rng(seed, i as u64)))
        .collect())
}

/// Per-slot frequencies of the events the closed forms describe.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotStatistics {
    pub slots: u64,
    pub public_slots: u64,
    /// public_hist[k]: public slots carrying k packets.
    pub public_hist: Vec<u64>,
    pub confidential_slots: u64,
    pub destination_outages: u64,
    pub intercepts: u64,
}

impl SlotStatistics {
    fn merge(mut self, o: SlotStatistics) -> Self {
        self.slots += o.slots;
        self.public_slots += o.public_slots;
        self.confidential_slots += o.confidential_slots;
        self.destination_outages += o.destination_outages;
        self.intercepts += o.intercepts;
        if o.public_hist.len() > self.public_hist.len() {
            self.public_hist.resize(o.public_hist.len(), 0);
        }
        for (a, b) in self.public_hist.iter_mut().zip(&o.public_hist) {
            *a += b;
        }
        self
    }

    /// Empirical distribution of packets per public slot.
    pub fn public_pmf(&self) -> Vec<f64> {
        self.public_hist
            .iter()
            .map(|&c| c as f64 / self.public_slots.max(1) as f64)
            .collect()
    }

    /// Destination outage frequency among confidential slots.
    pub fn omega(&self) -> f64 {
        self.destination_outages as f64 / self.confidential_slots.max(1) as f64
    }

    /// Fraction of slots in which the eavesdroppers decode a confidential frame.
    pub fn intercept_rate(&self) -> f64 {
        self.intercepts as f64 / self.slots.max(1) as f64
    }

    /// Fraction of slots in which the eavesdroppers fail.
    pub fn lambda(&self) -> f64 {
        1.0 - self.intercept_rate()
    }
}

const STAT_CHUNK: usize = 4096;

/// Samples `slots` independent slots, as if both streams were inexhaustible, and tallies
/// public packet counts, destination outages and interceptions.
pub fn slot_statistics(
    cfg: &SystemConfig,
    tx: &TxParams,
    scenario: &EveScenario,
    settings: &SimSettings,
    slots: usize,
    seed: u64,
) -> Result<SlotStatistics> {
    check_trials(slots)?;
    let ctx = SlotContext::new(cfg, tx, scenario, settings)?;
    let chunks = slots.div_ceil(STAT_CHUNK);
    let parts: Vec<SlotStatistics> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = STAT_CHUNK.min(slots - c * STAT_CHUNK);
            let mut rng = trial_rng(seed, c as u64);
            let radii = match ctx.mode {
                EveMode::Static => Some(ctx.eve.sample_radii(&mut rng)),
                EveMode::Iid => None,
            };
            let mut st = SlotStatistics::default();
            for _ in 0..n {
                st.slots += 1;
                let g_hat = sample_estimated_gain(ctx.cfg.n_t, &mut rng);
                if g_hat <= ctx.tx.nu {
                    let gamma = sinr_destination(&ctx.cfg, &ctx.tx, g_hat, FrameKind::Public);
                    let packets = public_packets(&ctx.cfg, gamma);
                    st.public_slots += 1;
                    if st.public_hist.len() <= packets {
                        st.public_hist.resize(packets + 1, 0);
                    }
                    st.public_hist[packets] += 1;
                } else {
                    let gamma =
                        sinr_destination(&ctx.cfg, &ctx.tx, g_hat, FrameKind::Confidential);
                    st.confidential_slots += 1;
                    st.destination_outages += u64::from(gamma < ctx.theta);
                    st.intercepts +=
                        u64::from(ctx.eve.intercepts(ctx.theta, radii.as_deref(), &mut rng));
                }
            }
            st
        })
        .collect();
    Ok(parts
        .into_iter()
        .fold(SlotStatistics::default(), SlotStatistics::merge))
}

/// Writes one JSON object per trial:
/// `{"trial", "t_d", "t_e", "delay_violated", "intercepted_in_time",
///   "slots_public", "slots_confidential", "slots_idle"}`.
pub fn write_trial_records<W: Write>(mut w: W, outcomes: &[DeliveryOutcome]) -> Result<()> {
    #[derive(Serialize)]
    struct Rec {
        trial: usize,
        t_d: Option<usize>,
        t_e: Option<usize>,
        delay_violated: bool,
        intercepted_in_time: bool,
        slots_public: usize,
        slots_confidential: usize,
        slots_idle: usize,
    }
    for (i, o) in outcomes.iter().enumerate() {
        let rec = Rec {
            trial: i,
            t_d: o.t_d,
            t_e: o.t_e,
            delay_violated: o.delay_violated,
            intercepted_in_time: o.intercepted_in_time,
            slots_public: o.slots_public,
            slots_confidential: o.slots_confidential,
            slots_idle: o.slots_idle,
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
