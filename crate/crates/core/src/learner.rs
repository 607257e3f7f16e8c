//! Feedforward network mapping (N_roi, N_bg, r_D, rho) to normalised
//! transmission parameters (zeta, P~_p, P~_s, nu~, L~_s).
//!
//! Layers 4-32-16-16-8-5: every hidden layer is dense -> batch norm -> ReLU,
//! the output layer is linear. Tensors are flat row-major `Vec<f64>`; a batch
//! of `n` rows of width `d` is a slice of length `n * d`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{solve, GaSettings, OptProblem, OptResult};
use crate::protocol_sim::trial_rng;
use crate::system_model::{divisors, ImageSpec, SystemConfig, TxParams};

pub const LAYER_SIZES: [usize; 6] = [4, 32, 16, 16, 8, 5];
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

const MAGIC: &[u8; 4] = b"SDNN";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// n_out x n_in, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    /// Uniform in +-sqrt(6 / fan_in), zero bias.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let lim = (6.0 / n_in as f64).sqrt();
        let mut d = Dense::zeros(n_in, n_out);
        for w in &mut d.w {
            *w = rng.random_range(-lim..lim);
        }
        d
    }

    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n * self.n_out];
        for i in 0..n {
            let xi = &x[i * self.n_in..(i + 1) * self.n_in];
            for j in 0..self.n_out {
                let wj = &self.w[j * self.n_in..(j + 1) * self.n_in];
                y[i * self.n_out + j] = self.b[j] + wj.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        y
    }

    /// Returns (dx, dw, db) given the layer input and dL/dy.
    pub fn backward(&self, x: &[f64], dy: &[f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut dx = vec![0.0; n * self.n_in];
        let mut dw = vec![0.0; self.w.len()];
        let mut db = vec![0.0; self.n_out];
        for i in 0..n {
            let xi = &x[i * self.n_in..(i + 1) * self.n_in];
            for j in 0..self.n_out {
                let g = dy[i * self.n_out + j];
                if g == 0.0 {
                    continue;
                }
                db[j] += g;
                for k in 0..self.n_in {
                    dw[j * self.n_in + k] += g * xi[k];
                    dx[i * self.n_in + k] += g * self.w[j * self.n_in + k];
                }
            }
        }
        (dx, dw, db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub width: usize,
    /// Scale (lambda).
    pub gamma: Vec<f64>,
    /// Shift (delta).
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// What the backward pass needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub n: usize,
}

impl BatchNorm {
    pub fn identity(width: usize) -> Self {
        BatchNorm {
            width,
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }

    pub fn forward_train(&self, z: &[f64], n: usize) -> (Vec<f64>, BnCache) {
        let d = self.width;
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += z[i * d + j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for i in 0..n {
            for j in 0..d {
                let c = z[i * d + j] - mean[j];
                var[j] += c * c;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut x_hat = vec![0.0; n * d];
        let mut y = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                let h = (z[i * d + j] - mean[j]) * inv_std[j];
                x_hat[i * d + j] = h;
                y[i * d + j] = self.gamma[j] * h + self.beta[j];
            }
        }
        (
            y,
            BnCache {
                x_hat,
                inv_std,
                mean,
                var,
                n,
            },
        )
    }

    pub fn forward_infer(&self, z: &[f64], n: usize) -> Vec<f64> {
        let d = self.width;
        let mut y = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                let h = (z[i * d + j] - self.running_mean[j]) / (self.running_var[j] + BN_EPS).sqrt();
                y[i * d + j] = self.gamma[j] * h + self.beta[j];
            }
        }
        y
    }

    /// Returns (dz, dgamma, dbeta).
    pub fn backward(&self, cache: &BnCache, dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (d, n) = (self.width, cache.n);
        let mut dgamma = vec![0.0; d];
        let mut dbeta = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                dgamma[j] += dy[i * d + j] * cache.x_hat[i * d + j];
                dbeta[j] += dy[i * d + j];
            }
        }
        // dxhat = dy * gamma; sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma.
        let mut dz = vec![0.0; n * d];
        let nf = n as f64;
        for i in 0..n {
            for j in 0..d {
                let g = self.gamma[j];
                dz[i * d + j] = cache.inv_std[j] / nf
                    * (nf * g * dy[i * d + j] - g * dbeta[j] - cache.x_hat[i * d + j] * g * dgamma[j]);
            }
        }
        (dz, dgamma, dbeta)
    }

    fn update_running(&mut self, cache: &BnCache) {
        for j in 0..self.width {
            self.running_mean[j] = BN_MOMENTUM * self.running_mean[j] + (1.0 - BN_MOMENTUM) * cache.mean[j];
            self.running_var[j] = BN_MOMENTUM * self.running_var[j] + (1.0 - BN_MOMENTUM) * cache.var[j];
        }
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// dL/dx given the pre-activation input and dL/dy.
pub fn relu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter().zip(dy).map(|(x, g)| if *x > 0.0 { *g } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnnModel {
    /// Five dense layers; the last is the linear output layer.
    pub dense: Vec<Dense>,
    /// One batch norm per hidden layer.
    pub bn: Vec<BatchNorm>,
    /// Multiplied into the raw (N_roi, N_bg, r_D, rho) input.
    pub input_scale: [f64; 4],
}

/// Gradients in the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dw: Vec<Vec<f64>>,
    pub db: Vec<Vec<f64>>,
    pub dgamma: Vec<Vec<f64>>,
    pub dbeta: Vec<Vec<f64>>,
}

struct Tape {
    /// Input of each dense layer.
    inputs: Vec<Vec<f64>>,
    /// BN outputs (pre-ReLU) per hidden layer.
    pre_relu: Vec<Vec<f64>>,
    caches: Vec<BnCache>,
}

impl DnnModel {
    /// Input scaling: N_roi and N_bg by 1e-3, r_D by 1/r_scale, rho as is.
    pub fn input_scale_for(r_scale: f64) -> [f64; 4] {
        [1e-3, 1e-3, 1.0 / r_scale, 1.0]
    }

    pub fn new<R: Rng + ?Sized>(input_scale: [f64; 4], rng: &mut R) -> Self {
        let hidden = LAYER_SIZES.len() - 2;
        DnnModel {
            dense: LAYER_SIZES.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
            bn: (1..=hidden).map(|i| BatchNorm::identity(LAYER_SIZES[i])).collect(),
            input_scale,
        }
    }

    /// Zero weights and biases, identity batch norm, unit input scale.
    pub fn zeros() -> Self {
        let hidden = LAYER_SIZES.len() - 2;
        DnnModel {
            dense: LAYER_SIZES.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            bn: (1..=hidden).map(|i| BatchNorm::identity(LAYER_SIZES[i])).collect(),
            input_scale: [1.0; 4],
        }
    }

    fn scale_inputs(&self, x: &[f64]) -> Vec<f64> {
        x.chunks(4)
            .flat_map(|r| r.iter().zip(&self.input_scale).map(|(a, s)| a * s))
            .collect()
    }

    fn check_input(&self, x: &[f64], n: usize) -> Result<()> {
        if n == 0 || x.len() != n * LAYER_SIZES[0] {
            return Err(Error::Contract(format!(
                "input of length {} is not {n} rows of {}",
                x.len(),
                LAYER_SIZES[0]
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite network input".into()));
        }
        Ok(())
    }

    fn forward_tape(&self, x: &[f64], n: usize) -> (Vec<f64>, Tape) {
        let mut tape = Tape {
            inputs: Vec::new(),
            pre_relu: Vec::new(),
            caches: Vec::new(),
        };
        let mut a = self.scale_inputs(x);
        for (k, layer) in self.dense.iter().enumerate() {
            let z = layer.forward(&a, n);
            tape.inputs.push(a);
            if k == self.bn.len() {
                return (z, tape);
            }
            let (y, cache) = self.bn[k].forward_train(&z, n);
            a = relu(&y);
            tape.pre_relu.push(y);
            tape.caches.push(cache);
        }
        unreachable!("model has an output layer")
    }

    /// Batched forward pass over `n` raw input rows; returns `n * 5` outputs.
    pub fn forward_batch(&self, x: &[f64], n: usize, mode: Mode) -> Result<Vec<f64>> {
        self.check_input(x, n)?;
        if mode == Mode::Train {
            return Ok(self.forward_tape(x, n).0);
        }
        let mut a = self.scale_inputs(x);
        for (k, layer) in self.dense.iter().enumerate() {
            let z = layer.forward(&a, n);
            if k == self.bn.len() {
                return Ok(z);
            }
            a = relu(&self.bn[k].forward_infer(&z, n));
        }
        unreachable!("model has an output layer")
    }

    pub fn forward(&self, input: &[f64], mode: Mode) -> Result<Vec<f64>> {
        self.forward_batch(input, 1, mode)
    }

    /// Mean squared error over all batch entries and outputs, with its
    /// gradient by reverse accumulation (training-mode batch statistics).
    pub fn loss_and_gradients(&self, x: &[f64], t: &[f64], n: usize) -> Result<(f64, Gradients)> {
        self.loss_gradients_tape(x, t, n).map(|(l, g, _)| (l, g))
    }

    fn loss_gradients_tape(&self, x: &[f64], t: &[f64], n: usize) -> Result<(f64, Gradients, Tape)> {
        self.check_input(x, n)?;
        let out_w = *LAYER_SIZES.last().unwrap();
        if t.len() != n * out_w {
            return Err(Error::Contract("target batch has the wrong length".into()));
        }
        let (y, tape) = self.forward_tape(x, n);
        let m = (n * out_w) as f64;
        let loss = y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m;
        let mut g: Vec<f64> = y.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / m).collect();
        let layers = self.dense.len();
        let mut grads = Gradients {
            dw: vec![Vec::new(); layers],
            db: vec![Vec::new(); layers],
            dgamma: vec![Vec::new(); self.bn.len()],
            dbeta: vec![Vec::new(); self.bn.len()],
        };
        for k in (0..layers).rev() {
            if k < self.bn.len() {
                g = relu_backward(&tape.pre_relu[k], &g);
                let (dz, dgam, dbet) = self.bn[k].backward(&tape.caches[k], &g);
                grads.dgamma[k] = dgam;
                grads.dbeta[k] = dbet;
                g = dz;
            }
            let (dx, dw, db) = self.dense[k].backward(&tape.inputs[k], &g, n);
            grads.dw[k] = dw;
            grads.db[k] = db;
            g = dx;
        }
        Ok((loss, grads, tape))
    }

    /// Mean squared error in inference mode.
    pub fn mse(&self, samples: &[TrainingSample]) -> Result<f64> {
        let (x, t) = stack(samples);
        let y = self.forward_batch(&x, samples.len(), Mode::Infer)?;
        Ok(y.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
    }

    fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut p: Vec<&mut Vec<f64>> = Vec::new();
        for d in &mut self.dense {
            p.push(&mut d.w);
            p.push(&mut d.b);
        }
        for b in &mut self.bn {
            p.push(&mut b.gamma);
            p.push(&mut b.beta);
        }
        p
    }

    /// Writes the model in the binary container format (see README).
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(LAYER_SIZES.len() as u32).to_le_bytes())?;
        for s in LAYER_SIZES {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        let mut put = |v: &[f64]| -> Result<()> {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.input_scale)?;
        put(&[BN_EPS, BN_MOMENTUM])?;
        for d in &self.dense {
            put(&d.w)?;
            put(&d.b)?;
        }
        for b in &self.bn {
            put(&b.gamma)?;
            put(&b.beta)?;
            put(&b.running_mean)?;
            put(&b.running_var)?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidConfig("not a model file".into()));
        }
        let mut u = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u)?;
            Ok(u32::from_le_bytes(u))
        };
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model format version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count.min(64) {
            sizes.push(read_u32(&mut r)? as usize);
        }
        if sizes != LAYER_SIZES {
            return Err(Error::InvalidConfig(format!("unexpected layer sizes {sizes:?}")));
        }
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut buf = [0u8; 8];
            (0..n)
                .map(|_| {
                    r.read_exact(&mut buf)?;
                    Ok(f64::from_le_bytes(buf))
                })
                .collect()
        };
        let mut m = DnnModel::zeros();
        let s = take(4)?;
        m.input_scale.copy_from_slice(&s);
        let bn_consts = take(2)?;
        if bn_consts != [BN_EPS, BN_MOMENTUM] {
            return Err(Error::InvalidConfig("model was trained with different batch-norm constants".into()));
        }
        for d in &mut m.dense {
            d.w = take(d.w.len())?;
            d.b = take(d.b.len())?;
        }
        for b in &mut m.bn {
            b.gamma = take(b.width)?;
            b.beta = take(b.width)?;
            b.running_mean = take(b.width)?;
            b.running_var = take(b.width)?;
            if b.running_var.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidConfig("negative running variance in model file".into()));
            }
        }
        Ok(m)
    }
}

/// One labelled example: raw input (N_roi, N_bg, r_D, rho), normalised target
/// (zeta, P~_p, P~_s, nu~, L~_s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub input: [f64; 4],
    pub target: [f64; 5],
}

impl TrainingSample {
    pub fn from_solution(cfg: &SystemConfig, img: &ImageSpec, tx: &TxParams) -> Self {
        let p_norm = cfg.sigma_n * cfg.gamma_max;
        TrainingSample {
            input: [img.n_roi as f64, img.n_bg as f64, cfg.r_d, cfg.rho],
            target: [
                tx.zeta,
                tx.p_p / p_norm,
                tx.p_s / p_norm,
                tx.nu / nu_max(cfg),
                tx.l_s as f64 / img.n_roi as f64,
            ],
        }
    }

    pub fn from_result(cfg: &SystemConfig, img: &ImageSpec, res: &OptResult) -> Self {
        Self::from_solution(cfg, img, &res.tx_star)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::InvalidConfig(format!("target {:?} outside (0, 1]", self.target)));
        }
        if self.input.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.input[3] > 1.0 {
            return Err(Error::InvalidConfig(format!("input {:?} out of range", self.input)));
        }
        Ok(())
    }
}

/// Ranges the dataset generator draws (N_roi, N_bg, r_D, rho) from, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRanges {
    pub n_roi: (usize, usize),
    pub n_bg: (usize, usize),
    pub r_d: (f64, f64),
    pub rho: (f64, f64),
}

impl SampleRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_roi.0 >= 1
            && self.n_roi.0 <= self.n_roi.1
            && self.n_bg.0 <= self.n_bg.1
            && self.r_d.0 > 0.0
            && self.r_d.0 <= self.r_d.1
            && self.rho.0 > 0.0
            && self.rho.0 <= self.rho.1
            && self.rho.1 < 1.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("bad sample ranges {self:?}")));
        }
        Ok(())
    }
}

/// A GA-labelled sample; `(seed, index)` reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample: TrainingSample,
    pub seed: u64,
    pub index: u64,
    pub tx: TxParams,
    pub qvp: f64,
    pub feasible: bool,
}

/// Draws `count` instances around `base` and labels each with the GA.
/// Sample `i` uses stream `i` of `seed` for both its inputs and its GA run.
pub fn generate_dataset(
    base: &OptProblem,
    ranges: &SampleRanges,
    ga: &GaSettings,
    count: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    ranges.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let mut p = *base;
            p.img.n_roi = rng.random_range(ranges.n_roi.0..=ranges.n_roi.1);
            p.img.n_bg = rng.random_range(ranges.n_bg.0..=ranges.n_bg.1);
            p.cfg.r_d = rng.random_range(ranges.r_d.0..=ranges.r_d.1);
            p.cfg.rho = rng.random_range(ranges.rho.0..=ranges.rho.1);
            let res = solve(&p, &mut rng, ga)?;
            Ok(LabeledSample {
                sample: TrainingSample::from_result(&p.cfg, &p.img, &res),
                seed,
                index: i as u64,
                tx: res.tx_star,
                qvp: res.qvp_star,
                feasible: res.feasible,
            })
        })
        .collect()
}

/// Rebuilds the configuration a sample's input row describes.
pub fn instance_of(base: &OptProblem, input: &[f64; 4]) -> (SystemConfig, ImageSpec) {
    let mut cfg = base.cfg;
    let mut img = base.img;
    img.n_roi = input[0].round() as usize;
    img.n_bg = input[1].round() as usize;
    cfg.r_d = input[2];
    cfg.rho = input[3];
    (cfg, img)
}

fn nu_max(cfg: &SystemConfig) -> f64 {
    4.0 * cfg.n_t as f64
}

fn stack(samples: &[TrainingSample]) -> (Vec<f64>, Vec<f64>) {
    let x = samples.iter().flat_map(|s| s.input).collect();
    let t = samples.iter().flat_map(|s| s.target).collect();
    (x, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    /// (train, validation, test) sample counts.
    pub split: (usize, usize, usize),
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub drop_factor: f64,
    pub drop_period: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Radius used to scale r_D at the input; the largest r_D in the data when unset.
    pub r_scale: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            split: (3500, 750, 750),
            batch_size: 50,
            epochs: 500,
            learning_rate: 1e-3,
            drop_factor: 0.9,
            drop_period: 50,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            r_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean minibatch loss (batch statistics) per epoch.
    pub batch_loss: Vec<f64>,
    /// Inference-mode MSE on the training split after each epoch.
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub test_mse: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub learning_rates: Vec<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

/// Trains on `data` split in order into (train, validation, test); generated
/// rows are independent draws, so no reshuffle is needed. Mini-batches are
/// reshuffled every epoch. Returns the model from the epoch with the lowest
/// validation MSE.
pub fn train<R: Rng + ?Sized>(
    data: &[TrainingSample],
    settings: &TrainSettings,
    rng: &mut R,
) -> Result<(DnnModel, TrainReport)> {
    let (n_tr, n_val, n_te) = settings.split;
    if n_tr == 0 || n_val == 0 || data.len() < n_tr + n_val + n_te {
        return Err(Error::InvalidConfig(format!(
            "dataset of {} samples cannot fill split {:?}",
            data.len(),
            settings.split
        )));
    }
    if settings.batch_size < 2 || settings.epochs == 0 || !(settings.learning_rate > 0.0) || settings.r_scale.is_some_and(|r| !(r > 0.0)) {
        return Err(Error::InvalidConfig("need batch_size >= 2, epochs >= 1 and positive rates".into()));
    }
    for s in data {
        s.validate()?;
    }
    let tr = &data[..n_tr];
    let val = &data[n_tr..n_tr + n_val];
    let te = &data[n_tr + n_val..n_tr + n_val + n_te];

    let r_scale = settings
        .r_scale
        .unwrap_or_else(|| data.iter().map(|s| s.input[2]).fold(f64::MIN_POSITIVE, f64::max));
    let mut model = DnnModel::new(DnnModel::input_scale_for(r_scale), rng);
    let mut adam = {
        let mut probe = model.clone();
        let shapes: Vec<usize> = probe.params_mut().iter().map(|p| p.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    };
    let mut report = TrainReport {
        batch_loss: Vec::new(),
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        test_mse: f64::NAN,
        epochs: settings.epochs,
        best_epoch: 0,
        learning_rates: Vec::new(),
    };
    let mut best = (f64::INFINITY, model.clone());
    let mut order: Vec<usize> = (0..tr.len()).collect();
    for epoch in 0..settings.epochs {
        let lr = settings.learning_rate * settings.drop_factor.powi((epoch / settings.drop_period.max(1)) as i32);
        report.learning_rates.push(lr);
        order.shuffle(rng);
        let mut epoch_loss = (0.0, 0usize);
        for (bi, chunk) in order.chunks(settings.batch_size).enumerate() {
            // A single-row batch has no batch statistics to normalise with.
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<TrainingSample> = chunk.iter().map(|&i| tr[i]).collect();
            let (x, t) = stack(&batch);
            let (loss, g, tape) = model.loss_gradients_tape(&x, &t, batch.len())?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {bi}, learning rate {lr}"
                )));
            }
            epoch_loss.0 += loss * batch.len() as f64;
            epoch_loss.1 += batch.len();
            for (b, c) in model.bn.iter_mut().zip(&tape.caches) {
                b.update_running(c);
            }
            let grads: Vec<&Vec<f64>> = g
                .dw
                .iter()
                .zip(&g.db)
                .flat_map(|(w, b)| [w, b])
                .chain(g.dgamma.iter().zip(&g.dbeta).flat_map(|(a, b)| [a, b]))
                .collect();
            adam.t += 1;
            let c1 = 1.0 - settings.beta1.powi(adam.t);
            let c2 = 1.0 - settings.beta2.powi(adam.t);
            for (k, p) in model.params_mut().into_iter().enumerate() {
                for (j, w) in p.iter_mut().enumerate() {
                    let gj = grads[k][j];
                    let m = &mut adam.m[k][j];
                    let v = &mut adam.v[k][j];
                    *m = settings.beta1 * *m + (1.0 - settings.beta1) * gj;
                    *v = settings.beta2 * *v + (1.0 - settings.beta2) * gj * gj;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + settings.adam_eps);
                }
            }
        }
        report.batch_loss.push(epoch_loss.0 / epoch_loss.1.max(1) as f64);
        let tr_mse = model.mse(tr)?;
        let val_mse = model.mse(val)?;
        report.train_mse.push(tr_mse);
        report.val_mse.push(val_mse);
        if val_mse < best.0 {
            best = (val_mse, model.clone());
            report.best_epoch = epoch;
        }
    }
    let model = best.1;
    report.test_mse = if te.is_empty() { f64::NAN } else { model.mse(te)? };
    Ok((model, report))
}

/// Divisor of `n` nearest to `x`; ties go to the smaller divisor.
pub fn nearest_divisor(n: usize, x: f64) -> usize {
    divisors(n)
        .into_iter()
        .min_by(|a, b| (*a as f64 - x).abs().total_cmp(&(*b as f64 - x).abs()))
        .unwrap_or(1)
}

/// Inference-mode prediction, denormalised and clamped onto the box and
/// divisibility constraints.
pub fn predict(model: &DnnModel, cfg: &SystemConfig, img: &ImageSpec) -> Result<TxParams> {
    if img.n_roi == 0 {
        return Err(Error::InvalidConfig("n_roi must be positive".into()));
    }
    let input = [img.n_roi as f64, img.n_bg as f64, cfg.r_d, cfg.rho];
    let y = model.forward(&input, Mode::Infer)?;
    Ok(denormalize(cfg, img, &y))
}

/// Maps a normalised output vector onto feasible transmission parameters.
pub fn denormalize(cfg: &SystemConfig, img: &ImageSpec, y: &[f64]) -> TxParams {
    let lo = cfg.gamma_min * cfg.sigma_n * (1.0 + 1e-9);
    let hi = cfg.gamma_max * cfg.sigma_n;
    let power = |v: f64| {
        let p = v * hi;
        if p.is_nan() {
            hi
        } else {
            p.clamp(lo, hi)
        }
    };
    let finite_or = |v: f64, d: f64| if v.is_finite() { v } else { d };
    TxParams {
        zeta: finite_or(y[0], 1.0).clamp(1e-3, 1.0),
        p_p: power(y[1]),
        p_s: power(y[2]),
        nu: (finite_or(y[3], 1.0) * nu_max(cfg)).max(1e-6 * nu_max(cfg)),
        l_s: nearest_divisor(img.n_roi, finite_or(y[4], 1.0) * img.n_roi as f64),
    }
}
