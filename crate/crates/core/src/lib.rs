//! Analysis and simulation toolkit for fountain-coded, artificial-noise aided
//! image delivery over a MISO link with Poisson-distributed passive eavesdroppers.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_math`] – Gamma family, Beta, Whittaker W and adaptive quadrature.
//! * [`system_model`] – scenario and decision types, channel sampling, beamformers, SINRs.
//! * [`secrecy_analysis`] – closed-form eavesdropper statistics, delay/intercept
//!   distributions and the QoSec violation probability (QVP).
//! * [`protocol_sim`] – slot-by-slot Monte Carlo simulator with an XOR fountain codec.
//! * [`optimizer`] – genetic algorithm for the constrained transmission-parameter problem.
//! * [`learner`] – small feedforward network (dense + batch norm + ReLU) trained with Adam.

pub mod error;
pub mod learner;
pub mod optimizer;
pub mod protocol_sim;
pub mod secrecy_analysis;
pub mod special_math;
pub mod system_model;

pub use error::{Error, Result};
pub use secrecy_analysis::QvpBreakdown;
pub use system_model::{
    Combining, DerivedConstants, EveScenario, FrameKind, ImageSpec, SystemConfig, TxParams,
};
