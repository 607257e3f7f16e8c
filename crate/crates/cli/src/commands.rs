use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secdeliv_core::learner::{generate_dataset, predict, train, DnnModel, TrainingSample};
use secdeliv_core::optimizer::{baseline_ep, baseline_mp, solve};
use secdeliv_core::protocol_sim::{
    fip_from, qvp_curve_from, simulate_trials, slot_statistics, write_trial_records, McEstimate,
};
use secdeliv_core::secrecy_analysis::{intercept_probability, min_secure_ls, qvp, qvp_curve};
use secdeliv_core::{Combining, Error, ImageSpec, QvpBreakdown, TxParams};

use crate::config::{linear_to_db, RunConfig};
use crate::error::{CliError, EXIT_INFEASIBLE};
use crate::output::{fmt_f, fmt_opt, write_table, Provenance, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "d_lim")]
    DLim,
    #[value(name = "lambda_e")]
    LambdaE,
    Rho,
    #[value(name = "n_total")]
    NTotal,
    #[value(name = "n_t")]
    NT,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::DLim => "d_lim",
            Axis::LambdaE => "lambda_e",
            Axis::Rho => "rho",
            Axis::NTotal => "n_total",
            Axis::NT => "n_t",
        }
    }

    fn default_grid(self) -> Vec<f64> {
        match self {
            Axis::DLim => (1..=6).map(|i| 10.0 * i as f64).collect(),
            Axis::LambdaE => vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2],
            Axis::Rho => vec![0.8, 0.85, 0.9, 0.95, 0.99],
            Axis::NTotal => vec![50.0, 100.0, 150.0, 200.0],
            Axis::NT => vec![2.0, 4.0, 8.0],
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::DLim | Axis::NTotal | Axis::NT)
    }

    /// Moves `cfg` to grid point `v`. N_total keeps the RoI share and rounds
    /// N_roi to a multiple of L_s.
    fn apply(self, base: &RunConfig, v: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            Axis::DLim => c.image.d_lim = v as usize,
            Axis::LambdaE => c.system.lambda_e = v,
            Axis::Rho => c.system.rho = v,
            Axis::NT => c.system.n_t = v as usize,
            Axis::NTotal => {
                let total = v as usize;
                let share = base.image.n_roi as f64 / (base.image.n_roi + base.image.n_bg).max(1) as f64;
                let l = base.tx.l_s.max(1);
                let n_roi = (((total as f64 * share) / l as f64).round() as usize).max(1) * l;
                c.image.n_roi = n_roi.min(total / l * l);
                c.image.n_bg = total - c.image.n_roi;
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Full,
    Mp,
    Ep,
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Option<PathBuf>,
}

impl Ctx {
    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command, &self.cfg.canonical(), self.cfg.seed)
    }

    fn emit(&self, prov: &Provenance, table: &Table) -> Result<(), CliError> {
        write_table(self.out.as_deref(), prov, table)
    }
}

fn agree(analytic: f64, mc: &McEstimate, tol: f64) -> bool {
    (analytic - mc.value).abs() <= tol + 3.0 * mc.std_err
}

fn analytic_qvp(cfg: &RunConfig, sc: Combining) -> Result<QvpBreakdown, CliError> {
    let tx = cfg.checked_tx()?;
    Ok(qvp(&cfg.system_config(), &tx, &cfg.image_spec(), &cfg.eve_scenario(sc))?)
}

pub fn cmd_qvp(ctx: &Ctx, simulate: bool, records: Option<&Path>) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let b = analytic_qvp(c, c.scenario)?;
    let mut header = vec![
        "scenario", "d_lim", "qvp", "delay_violation", "intercept_term", "n_bar_bg", "n_tilde", "omega", "lambda",
    ];
    let mut row = vec![
        c.scenario.to_string(),
        c.image.d_lim.to_string(),
        fmt_f(b.qvp),
        fmt_f(b.delay_violation),
        fmt_f(b.intercept_term),
        b.n_bar_bg.to_string(),
        b.n_tilde.to_string(),
        fmt_f(b.omega),
        fmt_f(b.lambda),
    ];
    if simulate || records.is_some() {
        let out = simulate_trials(
            &c.system_config(),
            &c.tx_params(),
            &c.image_spec(),
            &c.eve_scenario(c.scenario),
            &c.sim,
            c.trials,
            c.seed,
        )?;
        let mc = qvp_curve_from(&out, &[c.image.d_lim], c.seed)?[0];
        header.extend(["mc_qvp", "mc_std_err", "trials", "agree"]);
        row.extend([
            fmt_f(mc.value),
            fmt_f(mc.std_err),
            mc.trials.to_string(),
            agree(b.qvp, &mc, c.tolerance).to_string(),
        ]);
        if let Some(path) = records {
            let f = File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            write_trial_records(BufWriter::new(f), &out)?;
        }
    }
    let mut t = Table::new(&header);
    t.push(row);
    ctx.emit(&ctx.provenance("qvp"), &t)
}

/// Smallest divisor of N_roi meeting the intercept budget, or N_roi itself
/// (flagged insecure) when none does.
fn secure_ls(cfg: &RunConfig, sc: Combining) -> Result<(usize, bool), CliError> {
    let tx = cfg.tx_params();
    match min_secure_ls(&cfg.system_config(), &tx, &cfg.eve_scenario(sc), cfg.eps_ip, cfg.image.n_roi) {
        Ok(l) => Ok((l, true)),
        Err(Error::Infeasible(_)) => Ok((cfg.image.n_roi, false)),
        Err(e) => Err(e.into()),
    }
}

struct SweepRow {
    value: f64,
    l_s: usize,
    secure: bool,
    b: QvpBreakdown,
    ip: f64,
    mc: Option<(McEstimate, McEstimate)>,
}

pub fn cmd_sweep(
    ctx: &Ctx,
    axis: Axis,
    values: Option<Vec<f64>>,
    simulate: bool,
    secure: bool,
) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let grid = values
        .or_else(|| c.sweep.values.clone())
        .unwrap_or_else(|| axis.default_grid());
    if grid.is_empty() {
        return Err(CliError::usage("empty sweep grid"));
    }
    if axis.integral() && grid.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0)) {
        return Err(CliError::usage(format!("{} takes positive integers", axis.name())));
    }
    let mut t = Table::new(&[
        "axis", "value", "scenario", "l_s", "secure", "qvp", "delay_violation", "intercept_term", "ip", "mc_qvp",
        "mc_std_err", "mc_fip", "agree",
    ]);
    for &sc in &c.sweep.scenarios {
        let mut rows: Vec<SweepRow> = Vec::new();
        if axis == Axis::DLim {
            // One analytic curve and one set of deliveries serve every deadline.
            let mut pc = c.clone();
            let mut ok = true;
            if secure {
                (pc.tx.l_s, ok) = secure_ls(&pc, sc)?;
            }
            let tx = pc.checked_tx()?;
            let (cfg, img, scen) = (pc.system_config(), pc.image_spec(), pc.eve_scenario(sc));
            let d: Vec<usize> = grid.iter().map(|v| *v as usize).collect();
            let curve = qvp_curve(&cfg, &tx, &img, &scen, &d)?;
            let ip = intercept_probability(&cfg, &tx, &scen)?;
            let mc = if simulate {
                let top = ImageSpec {
                    d_lim: *d.iter().max().unwrap(),
                    ..img
                };
                let out = simulate_trials(&cfg, &tx, &top, &scen, &pc.sim, pc.trials, pc.seed)?;
                let q = qvp_curve_from(&out, &d, pc.seed)?;
                Some(q.into_iter().zip(d.iter().map(|&dl| fip_from(&out, dl, pc.seed))).collect::<Vec<_>>())
            } else {
                None
            };
            for (i, b) in curve.into_iter().enumerate() {
                rows.push(SweepRow {
                    value: grid[i],
                    l_s: tx.l_s,
                    secure: ok,
                    b,
                    ip,
                    mc: mc.as_ref().map(|m| m[i]),
                });
            }
        } else {
            for &v in &grid {
                let at = |e: CliError| e.context(format!("{} = {v}", axis.name()));
                let mut pc = axis.apply(c, v);
                pc.validate().map_err(at)?;
                let mut ok = true;
                if secure {
                    (pc.tx.l_s, ok) = secure_ls(&pc, sc).map_err(at)?;
                }
                let tx = pc.checked_tx().map_err(at)?;
                let (cfg, img, scen) = (pc.system_config(), pc.image_spec(), pc.eve_scenario(sc));
                let b = qvp(&cfg, &tx, &img, &scen).map_err(|e| at(e.into()))?;
                let ip = intercept_probability(&cfg, &tx, &scen)?;
                let mc = if simulate {
                    let out = simulate_trials(&cfg, &tx, &img, &scen, &pc.sim, pc.trials, pc.seed)?;
                    Some((qvp_curve_from(&out, &[img.d_lim], pc.seed)?[0], fip_from(&out, img.d_lim, pc.seed)))
                } else {
                    None
                };
                rows.push(SweepRow {
                    value: v,
                    l_s: tx.l_s,
                    secure: ok,
                    b,
                    ip,
                    mc,
                });
            }
        }
        for r in rows {
            t.push(vec![
                axis.name().into(),
                fmt_f(r.value),
                sc.to_string(),
                r.l_s.to_string(),
                r.secure.to_string(),
                fmt_f(r.b.qvp),
                fmt_f(r.b.delay_violation),
                fmt_f(r.b.intercept_term),
                fmt_f(r.ip),
                fmt_opt(r.mc.map(|m| m.0.value)),
                fmt_opt(r.mc.map(|m| m.0.std_err)),
                fmt_opt(r.mc.map(|m| m.1.value)),
                r.mc.map(|m| agree(r.b.qvp, &m.0, c.tolerance).to_string()).unwrap_or_default(),
            ]);
        }
    }
    let mut prov = ctx.provenance("sweep");
    prov.extra.push(("axis".into(), axis.name().into()));
    ctx.emit(&prov, &t)
}

pub fn cmd_min_ls(ctx: &Ctx, eps: Vec<f64>, simulate: bool) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let eps = if eps.is_empty() { vec![c.eps_ip] } else { eps };
    let cfg = c.system_config();
    let tx0 = c.tx_params();
    tx0.validate()?;
    tx0.check_bounds(&cfg)?;
    let scen = c.eve_scenario(c.scenario);
    let mut t = Table::new(&["eps_ip", "l_s", "ip", "mc_ip", "mc_std_err", "slots"]);
    for e in eps {
        let l = min_secure_ls(&cfg, &tx0, &scen, e, c.image.n_roi)?;
        let tx = TxParams { l_s: l, ..tx0 };
        let ip = intercept_probability(&cfg, &tx, &scen)?;
        let mc = if simulate {
            let st = slot_statistics(&cfg, &tx, &scen, &c.sim, c.trials, c.seed)?;
            Some(McEstimate::from_counts(st.intercepts as usize, st.slots as usize, c.seed))
        } else {
            None
        };
        t.push(vec![
            fmt_f(e),
            l.to_string(),
            fmt_f(ip),
            fmt_opt(mc.map(|m| m.value)),
            fmt_opt(mc.map(|m| m.std_err)),
            mc.map(|m| m.trials.to_string()).unwrap_or_default(),
        ]);
    }
    ctx.emit(&ctx.provenance("min-ls"), &t)
}

pub fn cmd_optimize(ctx: &Ctx, method: Method) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let problem = c.problem();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let res = match method {
        Method::Full => solve(&problem, &mut rng, &c.ga),
        Method::Mp => baseline_mp(&problem, &mut rng, &c.ga),
        Method::Ep => baseline_ep(&problem, &mut rng, &c.ga),
    }?;
    let tx = res.tx_star;
    let ip = intercept_probability(&problem.cfg, &tx, &problem.scenario)?;
    let mut t = Table::new(&[
        "method", "zeta", "p_p_db", "p_s_db", "nu", "l_s", "qvp", "ip", "feasible", "evaluations",
    ]);
    t.push(vec![
        format!("{method:?}").to_lowercase(),
        fmt_f(tx.zeta),
        fmt_f(linear_to_db(tx.p_p / problem.cfg.sigma_n)),
        fmt_f(linear_to_db(tx.p_s / problem.cfg.sigma_n)),
        fmt_f(tx.nu),
        tx.l_s.to_string(),
        fmt_f(res.qvp_star),
        fmt_f(ip),
        res.feasible.to_string(),
        res.evaluations.to_string(),
    ]);
    ctx.emit(&ctx.provenance("optimize"), &t)?;
    if !res.feasible {
        return Err(CliError {
            code: EXIT_INFEASIBLE,
            msg: "no feasible transmission parameters found".into(),
        });
    }
    Ok(())
}

const DATASET_HEADER: [&str; 13] = [
    "seed", "index", "n_roi", "n_bg", "r_d", "rho", "zeta", "p_p_norm", "p_s_norm", "nu_norm", "l_s_norm", "qvp", "feasible",
];

pub fn cmd_gen_dataset(ctx: &Ctx, count: Option<usize>) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let count = count.unwrap_or(c.dataset.count);
    let data = generate_dataset(&c.problem(), &c.dataset.ranges, &c.ga, count, c.seed)?;
    let mut t = Table::new(&DATASET_HEADER);
    for d in &data {
        let s = &d.sample;
        let mut row = vec![d.seed.to_string(), d.index.to_string()];
        row.push(format!("{}", s.input[0] as usize));
        row.push(format!("{}", s.input[1] as usize));
        row.extend(s.input[2..].iter().map(|v| fmt_f(*v)));
        row.extend(s.target.iter().map(|v| fmt_f(*v)));
        row.push(fmt_f(d.qvp));
        row.push(d.feasible.to_string());
        t.push(row);
    }
    ctx.emit(&ctx.provenance("gen-dataset"), &t)
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingSample>, CliError> {
    let (header, rows) = crate::output::read_table(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("{}: missing column {name}", path.display())))
    };
    let inputs = ["n_roi", "n_bg", "r_d", "rho"].map(col);
    let targets = ["zeta", "p_p_norm", "p_s_norm", "nu_norm", "l_s_norm"].map(col);
    let inputs: Vec<usize> = inputs.into_iter().collect::<Result<_, _>>()?;
    let targets: Vec<usize> = targets.into_iter().collect::<Result<_, _>>()?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let num = |j: usize| {
                r[j].parse::<f64>()
                    .map_err(|_| CliError::config(format!("{}: row {}: bad number {:?}", path.display(), i + 1, r[j])))
            };
            let mut s = TrainingSample {
                input: [0.0; 4],
                target: [0.0; 5],
            };
            for (k, &j) in inputs.iter().enumerate() {
                s.input[k] = num(j)?;
            }
            for (k, &j) in targets.iter().enumerate() {
                s.target[k] = num(j)?;
            }
            Ok(s)
        })
        .collect()
}

pub fn cmd_train(ctx: &Ctx, dataset: &Path, model_path: &Path) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let data = read_dataset(dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (model, report) = train(&data, &c.train, &mut rng).map_err(|e| CliError::from(e).context(dataset.display()))?;
    let f = File::create(model_path).map_err(|e| CliError::io(format!("{}: {e}", model_path.display())))?;
    model.save(BufWriter::new(f))?;
    let mut t = Table::new(&["epoch", "learning_rate", "batch_loss", "train_mse", "val_mse"]);
    for i in 0..report.train_mse.len() {
        t.push(vec![
            i.to_string(),
            fmt_f(report.learning_rates[i]),
            fmt_f(report.batch_loss[i]),
            fmt_f(report.train_mse[i]),
            fmt_f(report.val_mse[i]),
        ]);
    }
    let mut prov = ctx.provenance("train");
    prov.extra.push(("best_epoch".into(), report.best_epoch.to_string()));
    prov.extra.push(("test_mse".into(), fmt_f(report.test_mse)));
    ctx.emit(&prov, &t)
}

pub fn cmd_predict(ctx: &Ctx, model_path: &Path) -> Result<(), CliError> {
    let c = &ctx.cfg;
    let f = File::open(model_path).map_err(|e| CliError::io(format!("{}: {e}", model_path.display())))?;
    let model = DnnModel::load(BufReader::new(f)).map_err(|e| CliError::from(e).context(model_path.display()))?;
    let (cfg, img, scen) = (c.system_config(), c.image_spec(), c.eve_scenario(c.scenario));
    let tx = predict(&model, &cfg, &img)?;
    let q = match qvp(&cfg, &tx, &img, &scen) {
        Ok(b) => b.qvp,
        Err(Error::Infeasible(_)) => f64::NAN,
        Err(e) => return Err(e.into()),
    };
    let ip = intercept_probability(&cfg, &tx, &scen)?;
    let mut t = Table::new(&["zeta", "p_p_db", "p_s_db", "nu", "l_s", "qvp", "ip"]);
    t.push(vec![
        fmt_f(tx.zeta),
        fmt_f(linear_to_db(tx.p_p / cfg.sigma_n)),
        fmt_f(linear_to_db(tx.p_s / cfg.sigma_n)),
        fmt_f(tx.nu),
        tx.l_s.to_string(),
        fmt_f(q),
        fmt_f(ip),
    ]);
    ctx.emit(&ctx.provenance("predict"), &t)
}
