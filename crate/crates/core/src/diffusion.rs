//! Denoising diffusion prior over normalized feature vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::{derive_seed, kernels, Rng, Tensor, Var};

use crate::error::{contract, io_error, Result};
use crate::fit::{fit, Curve, OptimConfig};
use crate::nn::Mlp;
use crate::norm::NormStats;

pub const TIME_EMBEDDING_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// `betas` for steps `1..=T`, stored at index `t - 1`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return contract("schedule needs at least one step");
        }
        if betas.iter().any(|&b| !(0.0..1.0).contains(&b)) {
            return contract("every beta must lie in [0, 1)");
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alphas, alpha_bars })
    }

    /// Linear betas from `lo` to `hi` over `steps` steps.
    pub fn linear(steps: usize, lo: f64, hi: f64) -> Result<Self> {
        if steps == 0 || !(0.0 < lo && lo <= hi && hi < 1.0) {
            return contract(format!("invalid linear schedule ({steps}, {lo}, {hi})"));
        }
        let betas =
            (0..steps).map(|i| if steps == 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 }).collect();
        Self::from_betas(betas)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return contract(format!("step {t} outside 1..={}", self.steps()));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(100, 1e-4, 0.2).expect("valid default schedule")
    }
}

/// `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
pub fn forward_noise(schedule: &NoiseSchedule, x0: &Tensor, t: usize, eps: &Tensor) -> Result<Tensor> {
    schedule.check(t)?;
    if !x0.same_shape(eps) {
        return contract("x0 and eps shapes differ");
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(kernels::zip(x0, eps, |x, e| a * x + b * e))
}

/// Sinusoidal embedding of step `t`: `sin(t w_i)` then `cos(t w_i)` for
/// `w_i = 10000^(-i / (D/2))`.
pub fn time_embedding(t: usize) -> Vec<f64> {
    let half = TIME_EMBEDDING_DIM / 2;
    let mut out = Vec::with_capacity(TIME_EMBEDDING_DIM);
    let freqs: Vec<f64> = (0..half).map(|i| 10_000f64.powf(-(i as f64) / half as f64)).collect();
    out.extend(freqs.iter().map(|w| (t as f64 * w).sin()));
    out.extend(freqs.iter().map(|w| (t as f64 * w).cos()));
    out
}

/// Mean over rows of `|eps_net(input) - eps|^2`, where each input row is a
/// noised feature row followed by its time embedding.
pub fn denoising_loss<'t>(eps_net: &[Var<'t>], input: Var<'t>, eps: Var<'t>) -> Var<'t> {
    (Mlp::forward_taped(eps_net, input) - eps).square().row_sum().mean()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub cosine_decay: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            steps: 100,
            beta_start: 1e-4,
            beta_end: 0.2,
            epochs: 150,
            batch_size: 128,
            lr: 2e-3,
            cosine_decay: true,
        }
    }
}

impl PriorConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPrior {
    pub schedule: NoiseSchedule,
    /// `(x_t, embedding(t)) -> eps_hat`.
    pub eps_net: Mlp,
    pub norm: NormStats,
    pub curve: Option<Curve>,
}

impl DiffusionPrior {
    pub fn new(schedule: NoiseSchedule, norm: NormStats, hidden: &[usize], rng: &mut Rng) -> Self {
        let d = norm.dim();
        let sizes = [&[d + TIME_EMBEDDING_DIM][..], hidden, &[d]].concat();
        Self { schedule, eps_net: Mlp::new(&sizes, rng), norm, curve: None }
    }

    /// Builds a prior normalized on raw features `x` and trains it.
    pub fn fit(x: &Tensor, config: &PriorConfig, seed: u64) -> Result<Self> {
        let norm = NormStats::fit(x)?;
        let mut prior = Self::new(config.schedule()?, norm, &config.hidden, &mut Rng::new(seed).split("init"));
        prior.train(&prior.norm.normalize(x), config, derive_seed(seed, "train"))?;
        Ok(prior)
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    fn net_input(x: &Tensor, emb: &[f64]) -> Tensor {
        kernels::concat_cols(&[x, &Tensor::row_vector(emb.to_vec()).select_rows(&vec![0; x.rows()])])
    }

    /// `eps_hat` for normalized `x` at step `t`.
    pub fn predict_eps(&self, x: &Tensor, t: usize) -> Tensor {
        self.eps_net.forward(&Self::net_input(x, &time_embedding(t)))
    }

    /// Reverse-step mean `(x - beta/sqrt(1 - abar) eps_hat) / sqrt(alpha)`.
    pub fn reverse_mean(&self, x: &Tensor, t: usize) -> Tensor {
        let eps = self.predict_eps(x, t);
        let (a, b, ab) = (self.schedule.alpha(t), self.schedule.beta(t), self.schedule.alpha_bar(t));
        let c = b / (1.0 - ab).sqrt();
        let inv = 1.0 / a.sqrt();
        kernels::zip(x, &eps, |xv, ev| inv * (xv - c * ev))
    }

    /// Minimizes [`denoising_loss`] on normalized features `x0`.
    pub fn train(&mut self, x0: &Tensor, config: &PriorConfig, seed: u64) -> Result<()> {
        let optim = OptimConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            lr: config.lr,
            cosine: config.cosine_decay,
        };
        let mut params: Vec<Tensor> = self.eps_net.params().into_iter().cloned().collect();
        let mut rng = Rng::new(seed);
        let schedule = self.schedule.clone();
        let embeddings: Vec<Vec<f64>> = (1..=schedule.steps()).map(time_embedding).collect();
        let d = self.dim();
        let curve = fit("diffusion prior", &mut params, x0.rows(), &optim, &mut rng, |tape, vars, rows, rng| {
            let n = rows.len();
            let mut input = Vec::with_capacity(n * (d + TIME_EMBEDDING_DIM));
            let eps = rng.normal_matrix(n, d);
            for (i, &r) in rows.iter().enumerate() {
                let t = 1 + rng.below(schedule.steps());
                let ab = schedule.alpha_bar(t);
                let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
                input.extend(x0.row(r).iter().zip(eps.row(i)).map(|(x, e)| a * x + b * e));
                input.extend(&embeddings[t - 1]);
            }
            let input = Tensor::matrix(n, d + TIME_EMBEDDING_DIM, input).expect("consistent sizes");
            denoising_loss(vars, tape.constant(input), tape.constant(eps))
        })?;
        self.eps_net.load(&params);
        self.curve = Some(curve);
        Ok(())
    }

    /// Ancestral sampling of `n` rows, returned in raw units.
    pub fn sample_unconditional(&self, n: usize, seed: u64) -> Result<Tensor> {
        if n == 0 {
            return contract("sample count must be positive");
        }
        let mut rng = Rng::new(seed);
        let mut x = rng.normal_matrix(n, self.dim());
        for t in (1..=self.schedule.steps()).rev() {
            let mean = self.reverse_mean(&x, t);
            x = if t > 1 {
                let z = rng.normal_matrix(n, self.dim());
                let s = self.schedule.beta(t).sqrt();
                kernels::zip(&mean, &z, |m, e| m + s * e)
            } else {
                mean
            };
        }
        Ok(self.norm.denormalize(&x))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| io_error(path, e))?;
        std::fs::write(path, text).map_err(|e| io_error(path, e))
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_error(path, e))
    }
}
