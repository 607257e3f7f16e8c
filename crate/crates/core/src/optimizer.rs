//! Genetic algorithm for the constrained transmission-parameter problem:
//! minimise the analytic QVP over (zeta, P_p, P_s, nu, L_s) subject to the
//! per-frame intercept constraint, the transmit-SNR box and L_s | N_roi.
//!
//! Continuous genes live in normalised form: zeta itself, P/(sigma_n gamma_max)
//! for both powers and nu/nu_max with nu_max = 4 n_T. L_s is a categorical gene
//! indexing the sorted divisors of N_roi.
//!
//! Individuals rank by fitness at FITNESS_RESOLUTION, then by the analytic
//! mean delivery time, so that among equally good configurations the faster
//! one wins.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::secrecy_analysis::{intercept_probability, qvp, DeliveryModel};
use crate::system_model::{divisors, EveScenario, ImageSpec, SystemConfig, TxParams};

/// One instance of the optimisation problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    pub cfg: SystemConfig,
    pub img: ImageSpec,
    pub scenario: EveScenario,
    pub eps_ip: f64,
}

impl OptProblem {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.img.validate()?;
        self.scenario.validate()?;
        if !(self.eps_ip > 0.0 && self.eps_ip < 1.0) {
            return Err(Error::InvalidConfig(format!("eps_ip = {} not in (0, 1)", self.eps_ip)));
        }
        if self.img.n_roi == 0 {
            return Err(Error::InvalidConfig(
                "n_roi must be positive: L_s ranges over its divisors".into(),
            ));
        }
        Ok(())
    }

    /// Upper end of the nu gene.
    pub fn nu_max(&self) -> f64 {
        4.0 * self.cfg.n_t as f64
    }

    /// Lower end of the normalised power genes (exclusive in the constraint).
    pub fn power_floor(&self) -> f64 {
        self.cfg.gamma_min / self.cfg.gamma_max
    }
}

/// Genes held fixed during a run. Powers are given normalised (P/(sigma_n gamma_max)).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pins {
    pub zeta: Option<f64>,
    pub p_p: Option<f64>,
    pub p_s: Option<f64>,
    pub nu: Option<f64>,
    pub l_s: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_prob: f64,
    /// SBX distribution index.
    pub sbx_eta: f64,
    pub mutation_prob: f64,
    /// Polynomial-mutation distribution index.
    pub mutation_eta: f64,
    pub elitism: usize,
    pub penalty: f64,
    pub pins: Pins,
    /// Storage order of the four continuous genes (a permutation of 0..4).
    pub gene_order: [usize; 4],
    /// Pattern-search refinement of the final best individual.
    pub polish: bool,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 60,
            generations: 120,
            tournament: 3,
            crossover_prob: 0.9,
            sbx_eta: 15.0,
            mutation_prob: 0.1,
            mutation_eta: 20.0,
            elitism: 2,
            penalty: 1e3,
            pins: Pins::default(),
            gene_order: [0, 1, 2, 3],
            polish: true,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        let mut order = self.gene_order;
        order.sort_unstable();
        if order != [0, 1, 2, 3] {
            return Err(Error::InvalidConfig("gene_order must permute 0..4".into()));
        }
        if self.population < 2 || self.tournament == 0 || self.elitism >= self.population {
            return Err(Error::InvalidConfig(
                "need population >= 2, tournament >= 1, elitism < population".into(),
            ));
        }
        for (n, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{n} must lie in [0, 1]")));
            }
        }
        if !(self.penalty > 0.0) || !(self.sbx_eta >= 0.0) || !(self.mutation_eta >= 0.0) {
            return Err(Error::InvalidConfig("penalty and distribution indices must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub tx_star: TxParams,
    pub qvp_star: f64,
    pub feasible: bool,
    pub evaluations: usize,
    /// Best fitness after each generation, floored to FITNESS_RESOLUTION.
    pub history: Vec<f64>,
}

const ZETA_MIN: f64 = 1e-3;
/// Fitness values closer than this rank as equal and fall through to the
/// mean-delivery-time tie-break.
pub const FITNESS_RESOLUTION: f64 = 1e-9;
const NU_MIN: f64 = 1e-6;

/// Gene bounds in logical order (zeta, P_p, P_s, nu).
fn bounds(p: &OptProblem) -> [(f64, f64); 4] {
    let pf = p.power_floor() * (1.0 + 1e-9);
    [(ZETA_MIN, 1.0), (pf, 1.0), (pf, 1.0), (NU_MIN, 1.0)]
}

#[derive(Debug, Clone)]
struct Individual {
    /// Continuous genes in storage order.
    genes: [f64; 4],
    div: usize,
    /// Fitness floored to FITNESS_RESOLUTION.
    level: f64,
    /// Analytic E[T_D] (tie-break).
    mean_td: f64,
}

struct Ctx<'a> {
    problem: &'a OptProblem,
    settings: &'a GaSettings,
    divs: Vec<usize>,
    bounds: [(f64, f64); 4],
    pinned: [Option<f64>; 4],
    pinned_div: Option<usize>,
}

impl Ctx<'_> {
    /// Logical gene index stored at position `pos`.
    fn logical(&self, pos: usize) -> usize {
        self.settings.gene_order[pos]
    }

    fn decode(&self, genes: &[f64; 4], div: usize) -> TxParams {
        let mut logical = [0.0; 4];
        for (pos, &g) in genes.iter().enumerate() {
            logical[self.logical(pos)] = g;
        }
        let cfg = &self.problem.cfg;
        TxParams {
            zeta: logical[0],
            p_p: logical[1] * cfg.sigma_n * cfg.gamma_max,
            p_s: logical[2] * cfg.sigma_n * cfg.gamma_max,
            nu: logical[3] * self.problem.nu_max(),
            l_s: self.divs[div],
        }
    }

    fn box_violations(&self, tx: &TxParams) -> usize {
        let cfg = &self.problem.cfg;
        let mut v = 0;
        if !(tx.zeta > 0.0 && tx.zeta <= 1.0) {
            v += 1;
        }
        if !(tx.nu > 0.0) {
            v += 1;
        }
        for p in [tx.p_p, tx.p_s] {
            let snr = p / cfg.sigma_n;
            if !(snr > cfg.gamma_min && snr <= cfg.gamma_max) {
                v += 1;
            }
        }
        if self.problem.img.n_roi % tx.l_s != 0 {
            v += 1;
        }
        v
    }

    /// (fitness, E[T_D])
    fn evaluate(&self, genes: &[f64; 4], div: usize) -> (f64, f64) {
        let p = self.problem;
        let tx = self.decode(genes, div);
        let mean_td = DeliveryModel::new(&p.cfg, &tx, &p.img)
            .map(|m| m.mean())
            .unwrap_or(f64::INFINITY);
        let boxes = self.box_violations(&tx);
        let penalty = self.settings.penalty;
        let q = qvp(&p.cfg, &tx, &p.img, &p.scenario);
        let ip = intercept_probability(&p.cfg, &tx, &p.scenario);
        match (q, ip) {
            (Ok(q), Ok(ip)) => {
                let excess = (ip - p.eps_ip).max(0.0);
                (q.qvp + penalty * excess + penalty * boxes as f64, mean_td)
            }
            // Configurations the closed forms reject (e.g. public slots that
            // carry nothing) rank below every evaluable one.
            _ => (1.0 + penalty * (1 + boxes) as f64, f64::INFINITY),
        }
    }

    fn make(&self, genes: [f64; 4], div: usize) -> Individual {
        let (fitness, mean_td) = self.evaluate(&genes, div);
        Individual {
            genes,
            div,
            level: (fitness / FITNESS_RESOLUTION).floor() * FITNESS_RESOLUTION,
            mean_td,
        }
    }

    fn apply_pins(&self, genes: &mut [f64; 4], div: &mut usize) {
        for (pos, g) in genes.iter_mut().enumerate() {
            if let Some(v) = self.pinned[self.logical(pos)] {
                *g = v;
            }
        }
        if let Some(d) = self.pinned_div {
            *div = d;
        }
    }

    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> ([f64; 4], usize) {
        let mut genes = [0.0; 4];
        for (pos, g) in genes.iter_mut().enumerate() {
            let (lo, hi) = self.bounds[self.logical(pos)];
            *g = lo + (hi - lo) * rng.random::<f64>();
        }
        let mut div = rng.random_range(0..self.divs.len());
        self.apply_pins(&mut genes, &mut div);
        (genes, div)
    }
}

fn rank(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    a.level.total_cmp(&b.level).then(a.mean_td.total_cmp(&b.mean_td))
}

fn better(a: &Individual, b: &Individual) -> bool {
    rank(a, b).is_lt()
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [Individual], k: usize, rng: &mut R) -> &'a Individual {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.random_range(0..pop.len())];
        if better(c, best) {
            best = c;
        }
    }
    best
}

/// Simulated binary crossover on one gene pair, bounded.
fn sbx<R: Rng + ?Sized>(x1: f64, x2: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> (f64, f64) {
    if (x1 - x2).abs() < 1e-14 {
        return (x1, x2);
    }
    let u: f64 = rng.random();
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    };
    let c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2);
    let c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2);
    (c1.clamp(lo, hi), c2.clamp(lo, hi))
}

/// Polynomial mutation, bounded.
fn poly_mutate<R: Rng + ?Sized>(x: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let d = if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    };
    (x + d * (hi - lo)).clamp(lo, hi)
}

fn evaluate_all(ctx: &Ctx, cands: Vec<([f64; 4], usize)>) -> Vec<Individual> {
    cands
        .into_par_iter()
        .map(|(g, d)| ctx.make(g, d))
        .collect()
}

/// Hooke-Jeeves pattern search over the free continuous genes, then over
/// neighbouring divisors.
fn polish(ctx: &Ctx, mut best: Individual, evaluations: &mut usize) -> Individual {
    let free: Vec<usize> = (0..4)
        .filter(|&pos| ctx.pinned[ctx.logical(pos)].is_none())
        .collect();
    let mut step = 0.05;
    while step > 1e-5 {
        let mut improved = false;
        for &pos in &free {
            let (lo, hi) = ctx.bounds[ctx.logical(pos)];
            for dir in [1.0, -1.0] {
                let mut g = best.genes;
                g[pos] = (g[pos] + dir * step * (hi - lo)).clamp(lo, hi);
                if g[pos] == best.genes[pos] {
                    continue;
                }
                let cand = ctx.make(g, best.div);
                *evaluations += 1;
                if better(&cand, &best) {
                    best = cand;
                    improved = true;
                    break;
                }
            }
        }
        if ctx.pinned_div.is_none() {
            for d in [best.div.wrapping_sub(1), best.div + 1] {
                if d < ctx.divs.len() {
                    let cand = ctx.make(best.genes, d);
                    *evaluations += 1;
                    if better(&cand, &best) {
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Minimises the analytic QVP with a genetic algorithm.
pub fn solve<R: Rng + ?Sized>(problem: &OptProblem, rng: &mut R, settings: &GaSettings) -> Result<OptResult> {
    problem.validate()?;
    settings.validate()?;
    let divs = divisors(problem.img.n_roi);
    let pins = settings.pins;
    let pinned_div = match pins.l_s {
        Some(l) => Some(divs.iter().position(|&d| d == l).ok_or_else(|| {
            Error::InvalidConfig(format!("pinned l_s = {l} does not divide n_roi = {}", problem.img.n_roi))
        })?),
        None => None,
    };
    let nu_pin = pins.nu.map(|nu| nu / problem.nu_max());
    let ctx = Ctx {
        problem,
        settings,
        bounds: bounds(problem),
        pinned: [pins.zeta, pins.p_p, pins.p_s, nu_pin],
        pinned_div,
        divs,
    };

    let n = settings.population;
    let init: Vec<_> = (0..n).map(|_| ctx.random(rng)).collect();
    let mut pop = evaluate_all(&ctx, init);
    let mut evaluations = n;
    let mut history = Vec::with_capacity(settings.generations);
    let sort = |pop: &mut Vec<Individual>| {
        pop.sort_by(rank);
    };
    sort(&mut pop);
    for _ in 0..settings.generations {
        let mut kids = Vec::with_capacity(n);
        while kids.len() < n - settings.elitism {
            let a = tournament(&pop, settings.tournament, rng);
            let b = tournament(&pop, settings.tournament, rng);
            let (mut g1, mut g2) = (a.genes, b.genes);
            if rng.random::<f64>() < settings.crossover_prob {
                for pos in 0..4 {
                    let (lo, hi) = ctx.bounds[ctx.logical(pos)];
                    if rng.random::<f64>() < 0.5 {
                        let (c1, c2) = sbx(g1[pos], g2[pos], lo, hi, settings.sbx_eta, rng);
                        g1[pos] = c1;
                        g2[pos] = c2;
                    }
                }
            }
            let (mut d1, mut d2) = if rng.random::<f64>() < 0.5 {
                (a.div, b.div)
            } else {
                (b.div, a.div)
            };
            for (g, d) in [(&mut g1, &mut d1), (&mut g2, &mut d2)] {
                for pos in 0..4 {
                    if rng.random::<f64>() < settings.mutation_prob {
                        let (lo, hi) = ctx.bounds[ctx.logical(pos)];
                        g[pos] = poly_mutate(g[pos], lo, hi, settings.mutation_eta, rng);
                    }
                }
                if rng.random::<f64>() < settings.mutation_prob {
                    *d = rng.random_range(0..ctx.divs.len());
                }
                ctx.apply_pins(g, d);
            }
            kids.push((g1, d1));
            if kids.len() < n - settings.elitism {
                kids.push((g2, d2));
            }
        }
        evaluations += kids.len();
        let mut next: Vec<Individual> = pop[..settings.elitism].to_vec();
        next.extend(evaluate_all(&ctx, kids));
        sort(&mut next);
        pop = next;
        history.push(pop[0].level);
    }

    let mut best = pop[0].clone();
    if settings.polish {
        best = polish(&ctx, best, &mut evaluations);
        if let Some(last) = history.last_mut() {
            *last = last.min(best.level);
        }
    }
    let tx_star = ctx.decode(&best.genes, best.div);
    // Feasibility and the objective are recomputed from tx_star, not taken
    // from the penalised fitness.
    let (qvp_star, feasible) = match qvp(&problem.cfg, &tx_star, &problem.img, &problem.scenario) {
        Ok(q) => {
            let ip = intercept_probability(&problem.cfg, &tx_star, &problem.scenario)?;
            (q.qvp, ip <= problem.eps_ip && ctx.box_violations(&tx_star) == 0)
        }
        Err(_) => (1.0, false),
    };
    Ok(OptResult {
        tx_star,
        qvp_star,
        feasible,
        evaluations,
        history,
    })
}

/// Maximum-power baseline: both transmit SNRs pinned at gamma_max.
pub fn baseline_mp<R: Rng + ?Sized>(problem: &OptProblem, rng: &mut R, settings: &GaSettings) -> Result<OptResult> {
    let mut s = *settings;
    s.pins.p_p = Some(1.0);
    s.pins.p_s = Some(1.0);
    solve(problem, rng, &s)
}

/// Equal-power baseline: zeta pinned at 0.5.
pub fn baseline_ep<R: Rng + ?Sized>(problem: &OptProblem, rng: &mut R, settings: &GaSettings) -> Result<OptResult> {
    let mut s = *settings;
    s.pins.zeta = Some(0.5);
    solve(problem, rng, &s)
}
