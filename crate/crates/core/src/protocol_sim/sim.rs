//! Slot-level protocol simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fountain::{
    fountain_decode_frame, fountain_encode, PacketLedger, PayloadDecoder, Payloads, Stream,
};
use crate::error::{Error, Result};
use crate::system_model::{
    auto_r_max_ce, auto_r_max_nce, public_packets, sample_estimated_gain, sinr_destination,
    theta_for, Combining, EveSampler, EveScenario, FrameKind, ImageSpec, SystemConfig, TxParams,
};

/// Placement of the eavesdroppers across the slots of one delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EveMode {
    /// Fresh PPP every slot (slot-independent, as the analysis assumes).
    #[default]
    Iid,
    /// One PPP per delivery; only fading is redrawn per slot.
    Static,
}

/// Simulator knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub mode: EveMode,
    /// PPP truncation radius; chosen from the decoding threshold when `None`.
    pub r_max: Option<f64>,
    /// Slots to simulate past the deadline so T_D is observed beyond it.
    pub horizon: Option<usize>,
    /// Carry random payloads of this many bytes and verify them on completion.
    pub payload_bytes: Option<usize>,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            mode: EveMode::Iid,
            r_max: None,
            horizon: None,
            payload_bytes: None,
        }
    }
}

/// Share of the NCE CDF exponent the truncation may drop.
pub const NCE_TAIL: f64 = 1e-6;
/// Far-field fluctuation allowed by the CE truncation, relative to the threshold.
pub const CE_REL_STD: f64 = 0.01;

/// Eavesdropper population and decision rule for confidential frames.
#[derive(Debug, Clone)]
pub struct EveField {
    sampler: EveSampler,
    combining: Combining,
    r_max: f64,
    far_mean: f64,
    active: bool,
}

impl EveField {
    /// `omega_ref` is the smallest threshold the field will be tested against.
    pub fn new(
        cfg: &SystemConfig,
        tx: &TxParams,
        combining: Combining,
        r_max: Option<f64>,
        omega_ref: f64,
    ) -> Result<Self> {
        let sampler = EveSampler::new(cfg, tx)?;
        let active = cfg.lambda_e > 0.0;
        let r_max = match r_max {
            Some(r) if r > 0.0 => r,
            Some(r) => {
                return Err(Error::InvalidConfig(format!("r_max must be > 0, got {r}")));
            }
            None if !active => 1.0,
            None => match combining {
                Combining::Nce => auto_r_max_nce(cfg, tx, omega_ref, NCE_TAIL)?,
                Combining::Ce => auto_r_max_ce(cfg, tx, omega_ref, CE_REL_STD)?,
            },
        };
        let far_mean = if active && combining == Combining::Ce {
            sampler.far_field_mean(r_max)
        } else {
            0.0
        };
        Ok(EveField {
            sampler,
            combining,
            r_max,
            far_mean,
            active,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn sampler(&self) -> &EveSampler {
        &self.sampler
    }

    /// Radii of one PPP realisation inside the truncation disc.
    pub fn sample_radii<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = Vec::new();
        if self.active {
            self.sampler.sample_radii(self.r_max, rng, &mut v);
        }
        v
    }

    /// Combined SINR (max or sum) of one realisation; CE includes the far-field mean.
    pub fn combined_sinr<R: Rng + ?Sized>(&self, radii: Option<&[f64]>, rng: &mut R) -> f64 {
        if !self.active {
            return 0.0;
        }
        let mut acc = self.far_mean;
        let mut take = |r: f64, rng: &mut R| {
            let g = self.sampler.sinr_at(r, rng);
            match self.combining {
                Combining::Nce => acc = acc.max(g),
                Combining::Ce => acc += g,
            }
        };
        match radii {
            Some(rs) => rs.iter().for_each(|&r| take(r, rng)),
            None => {
                for _ in 0..self.sampler.sample_count(self.r_max, rng) {
                    let r = self.r_max * rng.random::<f64>().sqrt();
                    take(r, rng);
                }
            }
        }
        acc
    }

    /// Whether the eavesdroppers decode a frame whose threshold is `theta`
    /// (strict inequality). `radii` fixes positions (static mode).
    pub fn intercepts<R: Rng + ?Sized>(&self, theta: f64, radii: Option<&[f64]>, rng: &mut R) -> bool {
        if !self.active {
            return false;
        }
        // Every per-Eve SINR is non-negative, so the scan can stop at the
        // first Eve (NCE) or partial sum (CE) above the threshold.
        let mut acc = self.far_mean;
        let mut hit = |r: f64, rng: &mut R| match self.combining {
            Combining::Nce => self.sampler.sinr_exceeds(r, theta, rng),
            Combining::Ce => {
                acc += self.sampler.sinr_at(r, rng);
                acc > theta
            }
        };
        match radii {
            Some(rs) => rs.iter().any(|&r| hit(r, rng)),
            None => {
                let n = self.sampler.sample_count(self.r_max, rng);
                (0..n).any(|_| {
                    let r = self.r_max * rng.random::<f64>().sqrt();
                    hit(r, rng)
                })
            }
        }
    }
}

/// Everything fixed across the slots of a run.
#[derive(Debug, Clone)]
pub struct SlotContext {
    pub cfg: SystemConfig,
    pub tx: TxParams,
    pub theta: f64,
    pub eve: EveField,
    pub mode: EveMode,
}

impl SlotContext {
    pub fn new(cfg: &SystemConfig, tx: &TxParams, scenario: &EveScenario, settings: &SimSettings) -> Result<Self> {
        cfg.validate()?;
        tx.validate()?;
        scenario.validate()?;
        let theta = theta_for(tx.l_s, cfg.ratio_bt_b);
        let eve = EveField::new(cfg, tx, scenario.combining, settings.r_max, theta)?;
        Ok(SlotContext {
            cfg: *cfg,
            tx: *tx,
            theta,
            eve,
            mode: settings.mode,
        })
    }
}

/// Mutable per-delivery state.
#[derive(Debug, Clone)]
pub struct DeliveryState {
    pub ledger: PacketLedger,
    /// Confidential packets collected by the eavesdroppers so far.
    pub eve_packets: usize,
    /// Eve radii in static mode.
    pub radii: Option<Vec<f64>>,
    payloads: Option<(Payloads, PayloadDecoder)>,
}

impl DeliveryState {
    pub fn new<R: Rng + ?Sized>(ctx: &SlotContext, img: &ImageSpec, payload_bytes: Option<usize>, rng: &mut R) -> Self {
        let radii = match ctx.mode {
            EveMode::Static => Some(ctx.eve.sample_radii(rng)),
            EveMode::Iid => None,
        };
        let payloads = payload_bytes.map(|nb| {
            let n = img.n_roi + img.n_bg;
            let data = (0..n)
                .map(|_| {
                    let mut v = vec![0u8; nb];
                    rng.fill_bytes(&mut v);
                    v
                })
                .collect();
            (Payloads(data), PayloadDecoder::new(n))
        });
        DeliveryState {
            ledger: PacketLedger::new(img.n_roi, img.n_bg),
            eve_packets: 0,
            radii,
            payloads,
        }
    }

    /// True when every decoded payload equals its source (None without payloads).
    pub fn payloads_match(&self) -> Option<bool> {
        self.payloads.as_ref().map(|(src, dec)| {
            src.0
                .iter()
                .zip(&dec.0)
                .all(|(s, d)| d.as_ref() == Some(s))
        })
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlotRecord {
    /// Public frame carrying `packets` coded packets (all delivered).
    Public { g_hat: f64, packets: usize },
    /// Confidential frame of L_s packets.
    Confidential {
        g_hat: f64,
        delivered: bool,
        intercepted: bool,
    },
    /// Selected stream already complete; nothing sent.
    Idle { g_hat: f64 },
}

fn send(state: &mut DeliveryState, stream: Stream, l: usize, success: bool) -> Result<usize> {
    let frame = match fountain_encode(state.ledger.stream(stream), l)? {
        Some(f) => f,
        None => return Ok(0),
    };
    if success {
        if let Some((src, dec)) = state.payloads.as_mut() {
            for cp in &frame {
                dec.decode(cp, &src.encode(cp))?;
            }
        }
    }
    fountain_decode_frame(state.ledger.stream_mut(stream), &frame, success);
    Ok(frame.len())
}

/// Runs one slot of the hybrid protocol.
pub fn run_slot<R: Rng + ?Sized>(ctx: &SlotContext, state: &mut DeliveryState, rng: &mut R) -> Result<SlotRecord> {
    let g_hat = sample_estimated_gain(ctx.cfg.n_t, rng);
    if g_hat <= ctx.tx.nu {
        if state.ledger.public.is_complete() {
            return Ok(SlotRecord::Idle { g_hat });
        }
        let gamma = sinr_destination(&ctx.cfg, &ctx.tx, g_hat, FrameKind::Public);
        let l_p = public_packets(&ctx.cfg, gamma);
        let sent = if l_p > 0 {
            send(state, Stream::Public, l_p, true)?
        } else {
            0
        };
        Ok(SlotRecord::Public { g_hat, packets: sent })
    } else {
        if state.ledger.confidential.is_complete() {
            return Ok(SlotRecord::Idle { g_hat });
        }
        let gamma = sinr_destination(&ctx.cfg, &ctx.tx, g_hat, FrameKind::Confidential);
        let delivered = gamma >= ctx.theta;
        let intercepted = ctx.eve.intercepts(ctx.theta, state.radii.as_deref(), rng);
        if intercepted {
            state.eve_packets += ctx.tx.l_s;
        }
        send(state, Stream::Confidential, ctx.tx.l_s, delivered)?;
        Ok(SlotRecord::Confidential {
            g_hat,
            delivered,
            intercepted,
        })
    }
}

/// One Monte Carlo delivery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    /// Slot at which the destination held every packet; `None` if not within the horizon.
    pub t_d: Option<usize>,
    /// Slot at which the eavesdroppers held N_roi confidential packets; `None` if never.
    pub t_e: Option<usize>,
    pub delay_violated: bool,
    pub intercepted_in_time: bool,
    pub slots_public: usize,
    pub slots_confidential: usize,
    pub slots_idle: usize,
    /// Last slot simulated.
    pub horizon: usize,
    pub payloads_ok: Option<bool>,
}

impl DeliveryOutcome {
    /// Eves completed no later than the destination and the deadline `d`.
    pub fn intercepted_by(&self, d: usize) -> bool {
        let stop = self.t_d.map_or(d, |t| t.min(d));
        self.t_e.is_some_and(|e| e <= stop)
    }

    /// QoSec violation at deadline `d` (valid for `d <= horizon`).
    pub fn violates(&self, d: usize) -> bool {
        self.t_d.is_none_or(|t| t > d) || self.intercepted_by(d)
    }
}

/// Simulates one delivery until completion or the horizon
/// (`max(d_lim, settings.horizon)`).
pub fn simulate_delivery<R: Rng + ?Sized>(
    ctx: &SlotContext,
    img: &ImageSpec,
    settings: &SimSettings,
    rng: &mut R,
) -> Result<DeliveryOutcome> {
    ctx.tx.check_divides(img)?;
    img.validate()?;
    let horizon = img.d_lim.max(settings.horizon.unwrap_or(0));
    let mut state = DeliveryState::new(ctx, img, settings.payload_bytes, rng);
    let mut out = DeliveryOutcome {
        t_d: None,
        t_e: None,
        delay_violated: true,
        intercepted_in_time: false,
        slots_public: 0,
        slots_confidential: 0,
        slots_idle: 0,
        horizon,
        payloads_ok: None,
    };
    let captured = |s: &DeliveryState| img.n_roi > 0 && s.eve_packets >= img.n_roi;
    for t in 1..=horizon {
        let rec = run_slot(ctx, &mut state, rng)?;
        if t <= img.d_lim {
            match rec {
                SlotRecord::Public { .. } => out.slots_public += 1,
                SlotRecord::Confidential { .. } => out.slots_confidential += 1,
                SlotRecord::Idle { .. } => out.slots_idle += 1,
            }
        }
        if out.t_e.is_none() && captured(&state) {
            out.t_e = Some(t);
        }
        if state.ledger.is_complete() {
            out.t_d = Some(t);
            break;
        }
    }
    out.delay_violated = out.t_d.is_none_or(|t| t > img.d_lim);
    out.intercepted_in_time = out.intercepted_by(img.d_lim);
    out.payloads_ok = state.payloads_match();
    Ok(out)
}

/// Slots until the eavesdroppers hold N_roi confidential packets when every
/// confidential slot carries a fresh frame (no destination-side termination).
/// This is the process whose law is the T_E distribution.
pub fn simulate_eve_capture<R: Rng + ?Sized>(
    ctx: &SlotContext,
    img: &ImageSpec,
    horizon: usize,
    rng: &mut R,
) -> Option<usize> {
    if img.n_roi == 0 {
        return None;
    }
    let radii = match ctx.mode {
        EveMode::Static => Some(ctx.eve.sample_radii(rng)),
        EveMode::Iid => None,
    };
    let mut got = 0;
    for t in 1..=horizon {
        let g_hat = sample_estimated_gain(ctx.cfg.n_t, rng);
        if g_hat > ctx.tx.nu && ctx.eve.intercepts(ctx.theta, radii.as_deref(), rng) {
            got += ctx.tx.l_s;
            if got >= img.n_roi {
                return Some(t);
            }
        }
    }
    None
}

/// Random stream of trial (or chunk) `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
