//! `secdeliv`: analysis, simulation, optimisation and learning from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Axis, Ctx, Method};
use config::RunConfig;
use error::CliError;
use secdeliv_core::protocol_sim::EveMode;
use secdeliv_core::Combining;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Nce,
    Ce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Iid,
    Static,
}

#[derive(Parser)]
#[command(name = "secdeliv", version, about = "Secure fountain-coded image delivery toolkit")]
struct Cli {
    /// TOML run configuration (every section optional).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output table path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials (slots for min-ls).
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic QVP breakdown, optionally against simulation.
    Qvp {
        #[arg(long)]
        simulate: bool,
        /// Also write one JSON line per simulated delivery.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// QVP over a grid of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        simulate: bool,
        /// Set L_s at every grid point to the smallest divisor meeting eps_ip.
        #[arg(long)]
        secure_ls: bool,
    },
    /// Smallest L_s meeting the intercept constraint.
    MinLs {
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        simulate: bool,
    },
    /// Genetic-algorithm parameter optimisation.
    Optimize {
        #[arg(long, value_enum, default_value = "full")]
        method: Method,
    },
    /// GA-labelled training data.
    GenDataset {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the network on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Transmission parameters from a trained network.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        if t == 0 {
            return Err(CliError::usage("--trials must be positive"));
        }
        cfg.trials = t;
    }
    if let Some(s) = cli.scenario {
        let c = match s {
            ScenarioArg::Nce => Combining::Nce,
            ScenarioArg::Ce => Combining::Ce,
        };
        cfg.scenario = c;
        cfg.sweep.scenarios = vec![c];
    }
    if let Some(m) = cli.mode {
        cfg.sim.mode = match m {
            ModeArg::Iid => EveMode::Iid,
            ModeArg::Static => EveMode::Static,
        };
    }
    let ctx_path = cli.config.as_ref().map(|p| p.display().to_string());
    cfg.validate().map_err(|e| match &ctx_path {
        Some(p) => e.context(p),
        None => e,
    })?;
    let ctx = Ctx { cfg, out: cli.out };
    match cli.cmd {
        Cmd::Qvp { simulate, records } => commands::cmd_qvp(&ctx, simulate, records.as_deref()),
        Cmd::Sweep {
            axis,
            values,
            simulate,
            secure_ls,
        } => commands::cmd_sweep(&ctx, axis, values, simulate, secure_ls),
        Cmd::MinLs { eps, simulate } => commands::cmd_min_ls(&ctx, eps, simulate),
        Cmd::Optimize { method } => commands::cmd_optimize(&ctx, method),
        Cmd::GenDataset { count } => commands::cmd_gen_dataset(&ctx, count),
        Cmd::Train { dataset, model } => commands::cmd_train(&ctx, &dataset, &model),
        Cmd::Predict { model } => commands::cmd_predict(&ctx, &model),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("secdeliv: {}", e.msg);
            ExitCode::from(e.code as u8)
        }
    }
}
