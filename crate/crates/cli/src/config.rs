//! Run configuration: a TOML document whose every section is optional.
//! Powers and SNR limits are given in dB here and converted to linear
//! values before anything reaches the core library.

use std::path::Path;

use serde::{Deserialize, Serialize};

use secdeliv_core::learner::{SampleRanges, TrainSettings};
use secdeliv_core::optimizer::{GaSettings, OptProblem};
use secdeliv_core::protocol_sim::SimSettings;
use secdeliv_core::{Combining, EveScenario, ImageSpec, SystemConfig, TxParams};

use crate::error::CliError;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub n_t: usize,
    pub eta: f64,
    pub lambda_e: f64,
    pub ratio_bt_b: f64,
    pub sigma_n: f64,
    pub r_d: f64,
    pub rho: f64,
    pub gamma_min_db: f64,
    pub gamma_max_db: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let c = SystemConfig::reference();
        SystemSection {
            n_t: c.n_t,
            eta: c.eta,
            lambda_e: c.lambda_e,
            ratio_bt_b: c.ratio_bt_b,
            sigma_n: c.sigma_n,
            r_d: c.r_d,
            rho: c.rho,
            gamma_min_db: linear_to_db(c.gamma_min),
            gamma_max_db: linear_to_db(c.gamma_max),
        }
    }
}

/// Transmit SNRs P/sigma_n in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxSection {
    pub zeta: f64,
    pub p_p_db: f64,
    pub p_s_db: f64,
    pub nu: f64,
    pub l_s: usize,
}

impl Default for TxSection {
    fn default() -> Self {
        TxSection {
            zeta: 0.5,
            p_p_db: 30.0,
            p_s_db: 30.0,
            nu: 6.0,
            l_s: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    pub n_roi: usize,
    pub n_bg: usize,
    pub d_lim: usize,
}

impl Default for ImageSection {
    fn default() -> Self {
        ImageSection {
            n_roi: 60,
            n_bg: 40,
            d_lim: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Grid override; each axis has its own default grid.
    pub values: Option<Vec<f64>>,
    pub scenarios: Vec<Combining>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            values: None,
            scenarios: vec![Combining::Nce, Combining::Ce],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub ranges: SampleRanges,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            count: 500,
            ranges: SampleRanges {
                n_roi: (20, 120),
                n_bg: (20, 120),
                r_d: (1.5, 4.5),
                rho: (0.8, 0.99),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub scenario: Combining,
    pub k_terms: usize,
    pub eps_ip: f64,
    /// Allowed |analytic - simulated| on top of three standard errors.
    pub tolerance: f64,
    pub system: SystemSection,
    pub tx: TxSection,
    pub image: ImageSection,
    pub sim: SimSettings,
    pub sweep: SweepSection,
    pub ga: GaSettings,
    pub dataset: DatasetSection,
    pub train: TrainSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            trials: 10_000,
            scenario: Combining::Nce,
            k_terms: EveScenario::DEFAULT_K,
            eps_ip: 0.1,
            tolerance: 0.02,
            system: SystemSection::default(),
            tx: TxSection::default(),
            image: ImageSection::default(),
            sim: SimSettings::default(),
            sweep: SweepSection::default(),
            ga: GaSettings::default(),
            dataset: DatasetSection::default(),
            train: TrainSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.msg)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Canonical TOML of the effective configuration (hashed into provenance headers).
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            n_t: s.n_t,
            eta: s.eta,
            lambda_e: s.lambda_e,
            ratio_bt_b: s.ratio_bt_b,
            sigma_n: s.sigma_n,
            r_d: s.r_d,
            rho: s.rho,
            gamma_min: db_to_linear(s.gamma_min_db),
            gamma_max: db_to_linear(s.gamma_max_db),
        }
    }

    pub fn tx_params(&self) -> TxParams {
        let t = &self.tx;
        TxParams {
            zeta: t.zeta,
            p_p: self.system.sigma_n * db_to_linear(t.p_p_db),
            p_s: self.system.sigma_n * db_to_linear(t.p_s_db),
            nu: t.nu,
            l_s: t.l_s,
        }
    }

    pub fn image_spec(&self) -> ImageSpec {
        ImageSpec {
            n_roi: self.image.n_roi,
            n_bg: self.image.n_bg,
            d_lim: self.image.d_lim,
        }
    }

    pub fn eve_scenario(&self, combining: Combining) -> EveScenario {
        EveScenario {
            combining,
            k_terms: self.k_terms,
        }
    }

    pub fn problem(&self) -> OptProblem {
        OptProblem {
            cfg: self.system_config(),
            img: self.image_spec(),
            scenario: self.eve_scenario(self.scenario),
            eps_ip: self.eps_ip,
        }
    }

    /// Checks every section that a command may use.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = self.system_config();
        cfg.validate()?;
        self.image_spec().validate()?;
        self.eve_scenario(self.scenario).validate()?;
        self.ga.validate()?;
        self.dataset.ranges.validate()?;
        if !(self.eps_ip > 0.0 && self.eps_ip < 1.0) {
            return Err(CliError::config(format!("eps_ip = {} not in (0, 1)", self.eps_ip)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(CliError::config("tolerance must be non-negative"));
        }
        Ok(())
    }

    /// Transmission parameters checked against the system's SNR box.
    pub fn checked_tx(&self) -> Result<TxParams, CliError> {
        let tx = self.tx_params();
        tx.validate()?;
        tx.check_bounds(&self.system_config())?;
        tx.check_divides(&self.image_spec())?;
        Ok(tx)
    }
}
