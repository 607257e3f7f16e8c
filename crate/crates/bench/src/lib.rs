//! Shared fixtures for the criterion benchmarks.

use secdeliv_core::{EveScenario, ImageSpec, SystemConfig, TxParams};

/// Desk-scale instance used by every benchmark.
pub fn desk_instance() -> (SystemConfig, TxParams, ImageSpec, EveScenario) {
    (
        SystemConfig::reference(),
        TxParams {
            zeta: 0.5,
            p_p: 1000.0,
            p_s: 1000.0,
            nu: 6.0,
            l_s: 10,
        },
        ImageSpec {
            n_roi: 60,
            n_bg: 40,
            d_lim: 30,
        },
        EveScenario::nce(),
    )
}
