//! Extrapolated generation: gradient search on feature vectors (`opt`),
//! guided reverse diffusion (`dps`), and direct sampling from reverse
//! models (`reverse`).
//!
//! Both guided methods minimize the normalized specification residual
//! `|zhat(x) - z*|^2` summed over specifications, where `zhat` is the
//! likelihood model's predicted mean.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::{kernels, Adam, AdamConfig, NumericsError, Rng, Tape, Tensor, Var};

use crate::data::{GeneratorConfig, LabeledDataset};
use crate::diffusion::DiffusionPrior;
use crate::error::{contract, io_error, CoreError, Result};
use crate::likelihood::{LikelihoodModel, Variant};

/// How target specifications are chosen per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum TargetConfig {
    /// The same point for every chain.
    Point { z: Vec<f64> },
    /// Uniform over the box `[lo, hi]`, independently per chain.
    Region { lo: Vec<f64>, hi: Vec<f64> },
    /// Specifications drawn from the synthetic generator, keeping only those
    /// inside its novel region.
    #[default]
    Novel,
}

impl TargetConfig {
    pub fn dim(&self) -> usize {
        match self {
            TargetConfig::Point { z } => z.len(),
            TargetConfig::Region { lo, .. } => lo.len(),
            TargetConfig::Novel => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetConfig::Point { z } if z.is_empty() || z.iter().any(|v| !v.is_finite()) => {
                contract(format!("target {z:?} must be a nonempty finite vector"))
            }
            TargetConfig::Region { lo, hi }
                if lo.is_empty()
                    || lo.len() != hi.len()
                    || lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) =>
            {
                contract(format!("target region [{lo:?}, {hi:?}] is invalid"))
            }
            _ => Ok(()),
        }
    }

    /// Raw targets, one row per chain.
    pub fn draw(&self, n: usize, generator: &GeneratorConfig, rng: &mut Rng) -> Result<Tensor> {
        self.validate()?;
        if let TargetConfig::Novel = self {
            return generator.draw_novel_specs(n, rng);
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self {
                TargetConfig::Point { z } => data.extend(z),
                TargetConfig::Region { lo, hi } => {
                    data.extend(lo.iter().zip(hi).map(|(&a, &b)| rng.uniform_scalar(a, b)));
                }
                TargetConfig::Novel => unreachable!(),
            }
        }
        Ok(Tensor::matrix(n, d, data)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    pub lr: f64,
    pub steps: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { lr: 1e-2, steps: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpsConfig {
    pub guidance: f64,
}

impl Default for DpsConfig {
    fn default() -> Self {
        Self { guidance: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub n_gen: usize,
    pub target: TargetConfig,
    pub opt: OptConfig,
    pub dps: DpsConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { n_gen: 1000, target: TargetConfig::default(), opt: OptConfig::default(), dps: DpsConfig::default() }
    }
}

/// Output of one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub method: String,
    pub variant: Variant,
    pub seed: u64,
    pub config: GenerationConfig,
    /// Successful chains only, raw units.
    #[serde(skip)]
    pub samples: Option<Tensor>,
    /// Per-chain objective at the start and the end; `None` for failed
    /// chains.
    pub initial_loss: Vec<Option<f64>>,
    pub final_loss: Vec<Option<f64>>,
    pub failed: usize,
}

impl Generated {
    pub fn samples(&self) -> &Tensor {
        self.samples.as_ref().expect("samples present")
    }

    /// Writes `<stem>.csv` (`x1,x2,x3`) and `<stem>.json` (sidecar).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv_path = dir.join(format!("{stem}.csv"));
        write_matrix_csv(&csv_path, &["x1", "x2", "x3"], self.samples())?;
        let json_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(self).map_err(|e| io_error(&json_path, e))?;
        std::fs::write(&json_path, text).map_err(|e| io_error(&json_path, e))
    }
}

pub fn write_matrix_csv(path: &Path, header: &[&str], m: &Tensor) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for r in 0..m.rows() {
        w.write_record(m.row(r).iter().map(|v| v.to_string())).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Tensor> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let cols = r.headers().map_err(|e| io_error(path, e))?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        for f in rec.iter() {
            data.push(f.parse::<f64>().map_err(|e| io_error(path, e))?);
        }
    }
    if data.is_empty() {
        return Err(io_error(path, "no rows"));
    }
    Ok(Tensor::matrix(data.len() / cols, cols, data)?)
}

/// Per-row residual `|zhat(x) - z*|^2` in normalized units, untaped.
pub fn residuals(model: &LikelihoodModel, x_norm: &Tensor, z_norm: &Tensor) -> Vec<f64> {
    let pred = model.predict_normalized(x_norm).mean;
    (0..pred.rows()).map(|r| pred.row(r).iter().zip(z_norm.row(r)).map(|(a, b)| (a - b) * (a - b)).sum()).collect()
}

/// Per-row `|zhat(x) - z*|^2` on the tape, normalized units. Its gradient in
/// `x` drives both `opt` and `dps`.
pub fn guidance_rows<'t>(model: &LikelihoodModel, x: Var<'t>, z: Var<'t>) -> Var<'t> {
    (model.mean_taped(x) - z).square().row_sum()
}

/// Gradient of `sum_rows |zhat(x) - z*|^2` with respect to `x` plus the
/// per-row residuals. Rows listed in `failed` are zeroed first; rows whose
/// values turn non-finite are added to `failed` and get zero gradient.
fn guidance(model: &LikelihoodModel, x: &mut Tensor, z: &Tensor, failed: &mut [bool]) -> Result<(Tensor, Vec<f64>)> {
    let d = x.cols();
    loop {
        for (r, bad) in failed.iter_mut().enumerate() {
            if !*bad && x.row(r).iter().any(|v| !v.is_finite()) {
                *bad = true;
            }
            if *bad {
                x.data_mut()[r * d..(r + 1) * d].fill(0.0);
            }
        }
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let rows = guidance_rows(model, xv, tape.constant(z.clone()));
        let loss = rows.sum();
        match tape.backward(loss) {
            Ok(grads) => {
                let mut g = grads.wrt(xv);
                let res = rows.value().into_data();
                for (r, bad) in failed.iter().enumerate() {
                    if *bad {
                        g.data_mut()[r * d..(r + 1) * d].fill(0.0);
                    }
                }
                return Ok((g, res));
            }
            Err(NumericsError::NumericFailure { .. }) => {
                let res = residuals(model, x, z);
                let mut newly = false;
                for (r, v) in res.iter().enumerate() {
                    if !v.is_finite() && !failed[r] {
                        failed[r] = true;
                        newly = true;
                    }
                }
                if !newly {
                    return Err(CoreError::Degenerate("guidance gradient is non-finite for every chain".into()));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn require_forward(model: &LikelihoodModel, method: &str) -> Result<()> {
    if model.variant.is_reverse() {
        return contract(format!("{method} needs a forward likelihood model, got variant {}", model.variant));
    }
    Ok(())
}

/// Raw per-chain targets for `config`, from a stream independent of the
/// sampling stream.
pub fn draw_targets(config: &GenerationConfig, generator: &GeneratorConfig, seed: u64) -> Result<Tensor> {
    config.target.draw(config.n_gen, generator, &mut Rng::new(seed).split("targets"))
}

fn check_targets(targets: &Tensor, n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return contract("n_gen must be positive");
    }
    if targets.shape() != [n, d] || !targets.is_finite() {
        return contract(format!("targets must be a finite {n} x {d} matrix, got {:?}", targets.shape()));
    }
    Ok(())
}

/// Gradient search from seen rows. Each chain takes `steps` Adam steps on
/// its normalized features.
pub fn extrapolate_opt(
    model: &LikelihoodModel,
    seen: &LabeledDataset,
    config: &GenerationConfig,
    targets: &Tensor,
    seed: u64,
) -> Result<Generated> {
    require_forward(model, "opt")?;
    let opt = config.opt;
    if !(opt.lr > 0.0) {
        return contract("opt learning rate must be positive");
    }
    let n = config.n_gen;
    check_targets(targets, n, model.z_norm.dim())?;
    let z = model.z_norm.normalize(targets);
    let mut rng = Rng::new(seed);
    let picks: Vec<usize> = (0..n).map(|_| rng.below(seen.len())).collect();
    let init_raw = seen.x.select_rows(&picks);
    let init = model.x_norm.normalize(&init_raw);
    let mut x = init.clone();
    let mut failed = vec![false; n];
    let mut adam = Adam::new(AdamConfig::with_lr(opt.lr), &[&x]);
    let mut initial_loss = None;
    for _ in 0..opt.steps {
        let (g, res) = guidance(model, &mut x, &z, &mut failed)?;
        initial_loss.get_or_insert(res);
        adam.step(&mut [&mut x], &[g])?;
    }
    let last = residuals(model, &x, &z);
    let initial_loss = initial_loss.unwrap_or_else(|| last.clone());
    // Raw output is the initialization plus the displacement in raw units,
    // so zero steps return the initial rows bit for bit.
    let d = x.cols();
    let mut out = Vec::new();
    let mut final_loss = Vec::with_capacity(n);
    for r in 0..n {
        let ok = !failed[r] && last[r].is_finite() && x.row(r).iter().all(|v| v.is_finite());
        final_loss.push(ok.then_some(last[r]));
        if ok {
            for j in 0..d {
                out.push(init_raw.get(r, j) + (x.get(r, j) - init.get(r, j)) * model.x_norm.std[j]);
            }
        }
    }
    finish("opt", model.variant, seed, config, out, d, initial_loss, final_loss)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: &str,
    variant: Variant,
    seed: u64,
    config: &GenerationConfig,
    out: Vec<f64>,
    d: usize,
    initial: Vec<f64>,
    final_loss: Vec<Option<f64>>,
) -> Result<Generated> {
    let failed = final_loss.iter().filter(|v| v.is_none()).count();
    if out.is_empty() {
        return Err(CoreError::Degenerate(format!("{method}: every chain failed")));
    }
    let initial_loss = initial.iter().zip(&final_loss).map(|(&a, f)| f.and(Some(a))).collect();
    Ok(Generated {
        method: method.to_string(),
        variant,
        seed,
        config: config.clone(),
        samples: Some(Tensor::matrix(out.len() / d, d, out)?),
        initial_loss,
        final_loss,
        failed,
    })
}

/// Reverse diffusion with the predicted mean pulled along
/// `-guidance * grad_x |zhat(x_t) - z*|^2` at every step.
pub fn extrapolate_dps(
    model: &LikelihoodModel,
    prior: &DiffusionPrior,
    config: &GenerationConfig,
    targets: &Tensor,
    seed: u64,
) -> Result<Generated> {
    require_forward(model, "dps")?;
    let lambda = config.dps.guidance;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return contract("guidance scale must be finite and nonnegative");
    }
    if prior.dim() != model.x_norm.dim() {
        return contract("prior and likelihood feature dimensions differ");
    }
    let n = config.n_gen;
    check_targets(targets, n, model.z_norm.dim())?;
    let z = model.z_norm.normalize(targets);
    let d = prior.dim();
    let mut rng = Rng::new(seed);
    let mut failed = vec![false; n];
    let mut x = rng.normal_matrix(n, d);
    let mut initial = None;
    for t in (1..=prior.schedule.steps()).rev() {
        let mut mean = prior.reverse_mean(&x, t);
        if lambda != 0.0 {
            let (g, res) = guidance(model, &mut x, &z, &mut failed)?;
            initial.get_or_insert(res);
            mean = kernels::zip(&mean, &g, |m, gv| m - lambda * gv);
        }
        x = if t > 1 {
            let noise = rng.normal_matrix(n, d);
            let s = prior.schedule.beta(t).sqrt();
            kernels::zip(&mean, &noise, |m, e| m + s * e)
        } else {
            mean
        };
    }
    let last = residuals(model, &x, &z);
    let initial = initial.unwrap_or_else(|| last.clone());
    let raw = prior.norm.denormalize(&x);
    let mut out = Vec::new();
    let mut final_loss = Vec::with_capacity(n);
    for r in 0..n {
        let ok = !failed[r] && last[r].is_finite() && raw.row(r).iter().all(|v| v.is_finite());
        final_loss.push(ok.then_some(last[r]));
        if ok {
            out.extend_from_slice(raw.row(r));
        }
    }
    finish("dps", model.variant, seed, config, out, d, initial, final_loss)
}

/// Direct sampling from a reverse model at the configured targets.
pub fn generate_reverse(
    model: &LikelihoodModel,
    config: &GenerationConfig,
    targets: &Tensor,
    seed: u64,
) -> Result<Generated> {
    if !model.variant.is_reverse() {
        return contract(format!("reverse sampling needs variant D or E, got {}", model.variant));
    }
    check_targets(targets, config.n_gen, model.z_norm.dim())?;
    let samples = model.sample_reverse(targets, &mut Rng::new(seed))?;
    let d = samples.cols();
    let mut out = Vec::new();
    let mut final_loss = Vec::new();
    for r in 0..samples.rows() {
        let ok = samples.row(r).iter().all(|v| v.is_finite());
        final_loss.push(ok.then_some(0.0));
        if ok {
            out.extend_from_slice(samples.row(r));
        }
    }
    let zeros = vec![0.0; config.n_gen];
    finish("reverse", model.variant, seed, config, out, d, zeros, final_loss)
}

/// Inputs shared by every generation method.
pub struct GenerationInputs<'a> {
    pub model: &'a LikelihoodModel,
    pub prior: Option<&'a DiffusionPrior>,
    pub seen: &'a LabeledDataset,
    pub config: &'a GenerationConfig,
    /// Raw targets, one row per chain (see [`draw_targets`]).
    pub targets: &'a Tensor,
}

pub trait Extrapolator: Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, variant: Variant) -> bool;
    fn run(&self, inputs: &GenerationInputs<'_>, seed: u64) -> Result<Generated>;
}

struct Opt;
struct Dps;
struct Reverse;

impl Extrapolator for Opt {
    fn name(&self) -> &'static str {
        "opt"
    }
    fn supports(&self, variant: Variant) -> bool {
        !variant.is_reverse()
    }
    fn run(&self, inputs: &GenerationInputs<'_>, seed: u64) -> Result<Generated> {
        extrapolate_opt(inputs.model, inputs.seen, inputs.config, inputs.targets, seed)
    }
}

impl Extrapolator for Dps {
    fn name(&self) -> &'static str {
        "dps"
    }
    fn supports(&self, variant: Variant) -> bool {
        !variant.is_reverse()
    }
    fn run(&self, inputs: &GenerationInputs<'_>, seed: u64) -> Result<Generated> {
        let prior = inputs.prior.ok_or_else(|| CoreError::Contract("dps needs a trained diffusion prior".into()))?;
        extrapolate_dps(inputs.model, prior, inputs.config, inputs.targets, seed)
    }
}

impl Extrapolator for Reverse {
    fn name(&self) -> &'static str {
        "reverse"
    }
    fn supports(&self, variant: Variant) -> bool {
        variant.is_reverse()
    }
    fn run(&self, inputs: &GenerationInputs<'_>, seed: u64) -> Result<Generated> {
        generate_reverse(inputs.model, inputs.config, inputs.targets, seed)
    }
}

static EXTRAPOLATORS: [&dyn Extrapolator; 3] = [&Opt, &Dps, &Reverse];

pub fn extrapolators() -> &'static [&'static dyn Extrapolator] {
    &EXTRAPOLATORS
}

pub fn extrapolator(name: &str) -> Result<&'static dyn Extrapolator> {
    EXTRAPOLATORS.iter().copied().find(|e| e.name() == name).ok_or_else(|| CoreError::Unknown {
        kind: "generation method",
        name: name.to_string(),
        expected: EXTRAPOLATORS.iter().map(|e| e.name()).collect(),
    })
}
