//! Monte Carlo simulator of the hybrid public/confidential protocol.
//!
//! Each slot draws the estimated legitimate gain; below the threshold the
//! source sends as many public packets as the destination SINR supports,
//! above it a confidential frame of `L_s` packets protected by artificial
//! noise. The destination decodes a confidential frame when its rate fits the
//! channel; the eavesdroppers, drawn from a Poisson point process, when their
//! combined SINR strictly exceeds the same threshold.

mod estimate;
pub mod fountain;
mod sim;

pub use estimate::{
    estimate_qvp, fip_from, qvp_curve_from, sample_eve_capture_times, simulate_trials,
    slot_statistics, write_trial_records, McEstimate, SlotStatistics,
};
pub use fountain::{
    fountain_decode_frame, fountain_encode, CodedPacket, PacketLedger, PayloadDecoder, Payloads,
    Stream, StreamLedger,
};
pub use sim::{
    run_slot, simulate_delivery, simulate_eve_capture, trial_rng, DeliveryOutcome, DeliveryState,
    EveField, EveMode, SimSettings, SlotContext, SlotRecord, CE_REL_STD, NCE_TAIL,
};
