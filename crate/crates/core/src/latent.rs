//! Features and specifications observed only through linear mixings,
//! recovered by a pair of variational autoencoders coupled through a masked
//! Gaussian likelihood.
//!
//! Objective per row: `L_r + alpha L_m + beta L_s`, where `L_r` is the
//! reconstruction error plus KL term of both autoencoders, `L_m` is the
//! masked negative log-likelihood of the specification latents given the
//! feature latents (posterior means), and `L_s` the L1 norm of the masks.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::{derive_seed, Rng, Tape, Tensor, Var};

use crate::data::LabeledDataset;
use crate::diffusion::{DiffusionPrior, PriorConfig};
use crate::error::{contract, io_error, CoreError, Result};
use crate::eval::{compare_variants, EvalReport, SeedSamples};
use crate::fit::{fit, Curve, OptimConfig};
use crate::generation::{extrapolator, Generated, GenerationConfig, GenerationInputs};
use crate::likelihood::{family, LikelihoodModel, MaskChoice, ModelOptions, TrainConfig, Variant};
use crate::nn::{Cursor, Mlp};
use crate::norm::NormStats;

/// Redraws allowed when a mixing matrix is rank deficient.
pub const MIXING_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixing {
    /// `obs_dim x 3`.
    pub a_x: Tensor,
    /// `obs_dim x 2`.
    pub a_z: Tensor,
}

/// Whether the columns of `a` are linearly independent, by elimination on
/// `a^T a` with a relative pivot tolerance.
pub fn full_column_rank(a: &Tensor) -> bool {
    let k = a.cols();
    let mut g = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = (0..a.rows()).map(|r| a.get(r, i) * a.get(r, j)).sum();
        }
    }
    let scale = (0..k).map(|i| g[i][i]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return false;
    }
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| g[x][c].abs().total_cmp(&g[y][c].abs())).expect("nonempty");
        if g[p][c].abs() <= 1e-10 * scale {
            return false;
        }
        g.swap(c, p);
        for r in c + 1..k {
            let f = g[r][c] / g[c][c];
            for j in c..k {
                g[r][j] -= f * g[c][j];
            }
        }
    }
    true
}

impl Mixing {
    /// Entries uniform on (0, 1); redrawn while rank deficient.
    pub fn random(obs_dim: usize, d_x: usize, d_z: usize, seed: u64) -> Result<Self> {
        if obs_dim < d_x.max(d_z) {
            return contract(format!("obs_dim {obs_dim} cannot hold {d_x} or {d_z} independent columns"));
        }
        let mut rng = Rng::new(seed);
        let mut draw = |cols: usize| -> Result<Tensor> {
            for _ in 0..MIXING_ATTEMPTS {
                let data = (0..obs_dim * cols).map(|_| rng.next_f64()).collect();
                let m = Tensor::matrix(obs_dim, cols, data)?;
                if full_column_rank(&m) {
                    return Ok(m);
                }
            }
            contract(format!("no full-rank {obs_dim} x {cols} mixing after {MIXING_ATTEMPTS} draws"))
        };
        let a_x = draw(d_x)?;
        let a_z = draw(d_z)?;
        Ok(Self { a_x, a_z })
    }
}

/// `latents * a^T`.
pub fn mix_matrix(latents: &Tensor, a: &Tensor) -> Result<Tensor> {
    if latents.cols() != a.cols() {
        return contract("latent and mixing dimensions differ");
    }
    let at = Tensor::matrix(
        a.cols(),
        a.rows(),
        (0..a.cols()).flat_map(|c| (0..a.rows()).map(move |r| (r, c))).map(|(r, c)| a.get(r, c)).collect(),
    )?;
    Ok(xgen_numerics::kernels::matmul(latents, &at))
}

/// Observations `(Y_X, Y_Z) = (X A_X^T, Z A_Z^T)`.
pub fn mix(ds: &LabeledDataset, mixing: &Mixing) -> Result<(Tensor, Tensor)> {
    Ok((mix_matrix(&ds.x, &mixing.a_x)?, mix_matrix(&ds.z, &mixing.a_z)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccReport {
    /// Matched `|corr|` per truth column.
    pub matched: Vec<f64>,
    /// `assignment[i]` is the estimated column matched to truth column `i`.
    pub assignment: Vec<usize>,
    pub mean: f64,
}

fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).abs().min(1.0)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Mean correlation coefficient: absolute Pearson correlations matched one
/// to one by exhaustive search over column permutations.
pub fn mcc(estimated: &Tensor, truth: &Tensor) -> Result<MccReport> {
    if estimated.shape() != truth.shape() {
        return contract(format!("mcc shapes differ: {:?} vs {:?}", estimated.shape(), truth.shape()));
    }
    let k = truth.cols();
    if k > 8 {
        return contract("exhaustive matching supports at most 8 columns");
    }
    let est: Vec<Vec<f64>> = (0..k).map(|c| estimated.column(c)).collect();
    let tru: Vec<Vec<f64>> = (0..k).map(|c| truth.column(c)).collect();
    let corr: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| pearson_abs(&tru[i], &est[j])).collect()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(k) {
        let s: f64 = p.iter().enumerate().map(|(i, &j)| corr[i][j]).sum();
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    let (sum, assignment) = best.expect("at least one permutation");
    let matched = assignment.iter().enumerate().map(|(i, &j)| corr[i][j]).collect();
    Ok(MccReport { matched, assignment, mean: sum / k as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub hidden: usize,
    /// Standard deviation of the Gaussian decoder, in normalized observation
    /// units.
    pub obs_sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 5e-4, hidden: 64, obs_sigma: 0.03, epochs: 60, batch_size: 128, lr: 2e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinVae {
    pub enc_x: Mlp,
    pub dec_x: Mlp,
    pub enc_z: Mlp,
    pub dec_z: Mlp,
    /// Masked likelihood of the specification latents given the feature
    /// latents, on identity normalization.
    pub coupling: LikelihoodModel,
    pub y_x_norm: NormStats,
    pub y_z_norm: NormStats,
    pub config: VaeConfig,
    pub curve: Option<Curve>,
}

struct Encoded<'t> {
    mean: Var<'t>,
    recon: Var<'t>,
    kl: Var<'t>,
}

fn encode_taped<'t>(enc: &[Var<'t>], dec: &[Var<'t>], y: Var<'t>, eps: Var<'t>, d: usize, inv_var: f64) -> Encoded<'t> {
    let h = Mlp::forward_taped(enc, y);
    let mean = h.select_cols(&(0..d).collect::<Vec<_>>());
    let logvar = h.select_cols(&(d..2 * d).collect::<Vec<_>>());
    let sample = mean + logvar.scale(0.5).exp() * eps;
    let out = Mlp::forward_taped(dec, sample);
    let recon = (out - y).square().row_sum().scale(0.5 * inv_var);
    let kl = (mean.square() + logvar.exp() - logvar).add_scalar(-1.0).row_sum().scale(0.5);
    Encoded { mean, recon, kl }
}

/// Value of every part of the objective on one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLoss {
    pub reconstruction: f64,
    pub likelihood: f64,
    pub sparsity: f64,
    pub total: f64,
}

impl TwinVae {
    pub fn new(y_x: &Tensor, y_z: &Tensor, d_x: usize, d_z: usize, config: &VaeConfig, seed: u64) -> Result<Self> {
        if !(config.alpha >= 0.0 && config.beta >= 0.0 && config.obs_sigma > 0.0) {
            return contract("alpha, beta must be nonnegative and obs_sigma positive");
        }
        let mut rng = Rng::new(seed);
        let y_x_norm = NormStats::fit(y_x)?;
        let y_z_norm = NormStats::fit(y_z)?;
        let h = config.hidden;
        let enc_x = Mlp::new(&[y_x.cols(), h, 2 * d_x], &mut rng);
        let dec_x = Mlp::new(&[d_x, h, y_x.cols()], &mut rng);
        let enc_z = Mlp::new(&[y_z.cols(), h, 2 * d_z], &mut rng);
        let dec_z = Mlp::new(&[d_z, h, y_z.cols()], &mut rng);
        let options = ModelOptions { hidden: vec![h], mask: MaskChoice::Learnable, ..ModelOptions::default() };
        let heads = family(Variant::A.name())?.heads(d_x, d_z, &options, &mut rng)?;
        let coupling = LikelihoodModel {
            variant: Variant::A,
            heads,
            x_norm: NormStats::identity(d_x),
            z_norm: NormStats::identity(d_z),
            training: None,
        };
        Ok(Self { enc_x, dec_x, enc_z, dec_z, coupling, y_x_norm, y_z_norm, config: *config, curve: None })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dec_x.input_dim(), self.dec_z.input_dim())
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = [&self.enc_x, &self.dec_x, &self.enc_z, &self.dec_z]
            .iter()
            .flat_map(|m| m.params().into_iter().cloned())
            .collect();
        out.extend(self.coupling.params());
        out
    }

    pub fn load(&mut self, params: &[Tensor]) {
        let mut at = 0;
        for m in [&mut self.enc_x, &mut self.dec_x, &mut self.enc_z, &mut self.dec_z] {
            let n = m.n_tensors();
            m.load(&params[at..at + n]);
            at += n;
        }
        self.coupling.load(&params[at..]);
    }

    /// `[reconstruction + KL, likelihood, sparsity, total]` on the tape for
    /// normalized observations and reparameterization noise `ex`, `ez`.
    pub fn objective<'t>(&self, vars: &[Var<'t>], yx: Var<'t>, yz: Var<'t>, ex: Var<'t>, ez: Var<'t>) -> [Var<'t>; 4] {
        let (dx, dz) = self.dims();
        let inv_var = 1.0 / (self.config.obs_sigma * self.config.obs_sigma);
        let mut cur = Cursor::new(vars);
        let enc_x = cur.take(self.enc_x.n_tensors());
        let dec_x = cur.take(self.dec_x.n_tensors());
        let enc_z = cur.take(self.enc_z.n_tensors());
        let dec_z = cur.take(self.dec_z.n_tensors());
        let rest = cur.take(self.coupling.n_tensors());
        let x = encode_taped(enc_x, dec_x, yx, ex, dx, inv_var);
        let z = encode_taped(enc_z, dec_z, yz, ez, dz, inv_var);
        let lr = (x.recon + x.kl + z.recon + z.kl).mean();
        let (lm, ls) = self.coupling.objective_parts(rest, x.mean, z.mean);
        let total = lr + lm.scale(self.config.alpha) + ls.scale(self.config.beta);
        [lr, lm, ls, total]
    }

    /// Standard normal reparameterization noise for `n` rows.
    pub fn noise(&self, n: usize, rng: &mut Rng) -> (Tensor, Tensor) {
        let (dx, dz) = self.dims();
        (rng.normal_matrix(n, dx), rng.normal_matrix(n, dz))
    }

    /// Objective on raw observations with fixed noise from `seed`.
    pub fn evaluate(&self, y_x: &Tensor, y_z: &Tensor, seed: u64) -> VaeLoss {
        let (ex, ez) = self.noise(y_x.rows(), &mut Rng::new(seed));
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = self.params().into_iter().map(|p| tape.constant(p)).collect();
        let yx = tape.constant(self.y_x_norm.normalize(y_x));
        let yz = tape.constant(self.y_z_norm.normalize(y_z));
        let [lr, lm, ls, total] = self.objective(&vars, yx, yz, tape.constant(ex), tape.constant(ez));
        VaeLoss {
            reconstruction: lr.value().item(),
            likelihood: lm.value().item(),
            sparsity: ls.value().item(),
            total: total.value().item(),
        }
    }

    pub fn train(&mut self, y_x: &Tensor, y_z: &Tensor, seed: u64) -> Result<()> {
        if y_x.rows() != y_z.rows() {
            return contract("observation row counts differ");
        }
        let yx = self.y_x_norm.normalize(y_x);
        let yz = self.y_z_norm.normalize(y_z);
        let c = self.config;
        let optim = OptimConfig { epochs: c.epochs, batch_size: c.batch_size, lr: c.lr, cosine: false };
        let mut params = self.params();
        let mut rng = Rng::new(seed);
        let model = &*self;
        let curve = fit("twin autoencoder", &mut params, yx.rows(), &optim, &mut rng, |tape, vars, rows, rng| {
            let (ex, ez) = model.noise(rows.len(), rng);
            let [_, _, _, total] = model.objective(
                vars,
                tape.constant(yx.select_rows(rows)),
                tape.constant(yz.select_rows(rows)),
                tape.constant(ex),
                tape.constant(ez),
            );
            total
        })?;
        self.load(&params);
        self.curve = Some(curve);
        Ok(())
    }

    fn encode_mean(enc: &Mlp, y: &Tensor, d: usize) -> Tensor {
        let h = enc.forward(y);
        xgen_numerics::kernels::select_cols(&h, &(0..d).collect::<Vec<_>>())
    }

    /// Posterior-mean feature latents for raw `Y_X`.
    pub fn encode_x(&self, y_x: &Tensor) -> Tensor {
        Self::encode_mean(&self.enc_x, &self.y_x_norm.normalize(y_x), self.dims().0)
    }

    /// Posterior-mean specification latents for raw `Y_Z`.
    pub fn encode_z(&self, y_z: &Tensor) -> Tensor {
        Self::encode_mean(&self.enc_z, &self.y_z_norm.normalize(y_z), self.dims().1)
    }

    /// Mean reconstruction error `|y - dec(enc_mean(y))|^2` per row, summed
    /// over both observation blocks, normalized units.
    pub fn reconstruction_error(&self, y_x: &Tensor, y_z: &Tensor) -> f64 {
        let err = |enc: &Mlp, dec: &Mlp, y: &Tensor, d: usize| {
            let out = dec.forward(&Self::encode_mean(enc, y, d));
            out.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.rows() as f64
        };
        let (dx, dz) = self.dims();
        err(&self.enc_x, &self.dec_x, &self.y_x_norm.normalize(y_x), dx)
            + err(&self.enc_z, &self.dec_z, &self.y_z_norm.normalize(y_z), dz)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| io_error(path, e))?;
        std::fs::write(path, text).map_err(|e| io_error(path, e))
    }
}

/// Settings for the extrapolation pipeline run on recovered latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DownstreamConfig {
    pub model: ModelOptions,
    pub train: TrainConfig,
    pub prior: PriorConfig,
    pub generation: GenerationConfig,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        // Latent coordinates come in arbitrary order, so the parent sets
        // are learned rather than fixed.
        Self {
            model: ModelOptions { mask: MaskChoice::Learnable, ..ModelOptions::default() },
            train: TrainConfig::default(),
            prior: PriorConfig::default(),
            generation: GenerationConfig::default(),
        }
    }
}

/// Recovered latents of the seen split, encoded oracle features, and
/// encoded per-chain targets.
pub struct RecoveredTask<'a> {
    pub seen: &'a LabeledDataset,
    pub oracle_x: &'a Tensor,
    pub targets: &'a Tensor,
}

/// Variant-A likelihood, diffusion prior, then `opt` and `dps` generation in
/// latent space; MMD of both sample sets against the encoded oracle.
pub fn downstream_extrapolation(
    task: &RecoveredTask<'_>,
    config: &DownstreamConfig,
    seed: u64,
) -> Result<(EvalReport, Vec<Generated>)> {
    let model = LikelihoodModel::fit(
        family(Variant::A.name())?,
        &config.model,
        task.seen,
        &config.train,
        derive_seed(seed, "likelihood"),
    )?;
    let prior = DiffusionPrior::fit(&task.seen.x, &config.prior, derive_seed(seed, "prior"))?;
    let inputs = GenerationInputs {
        model: &model,
        prior: Some(&prior),
        seen: task.seen,
        config: &config.generation,
        targets: task.targets,
    };
    let mut runs = Vec::new();
    for method in ["opt", "dps"] {
        runs.push(extrapolator(method)?.run(&inputs, derive_seed(seed, &format!("extrapolate/{method}")))?);
    }
    let sets = runs.iter().map(|g| (Variant::A.to_string(), g.method.clone(), g.samples())).collect();
    let report = compare_variants(&[SeedSamples { seed, oracle: task.oracle_x, sets }])?;
    Ok((report, runs))
}

/// Writes `y_x_1..,y_z_1..` observations.
pub fn write_observations(path: &Path, y_x: &Tensor, y_z: &Tensor) -> Result<()> {
    if y_x.rows() != y_z.rows() {
        return Err(CoreError::Contract("observation row counts differ".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let header: Vec<String> =
        (1..=y_x.cols()).map(|i| format!("y_x_{i}")).chain((1..=y_z.cols()).map(|i| format!("y_z_{i}"))).collect();
    w.write_record(&header).map_err(|e| io_error(path, e))?;
    for r in 0..y_x.rows() {
        w.write_record(y_x.row(r).iter().chain(y_z.row(r)).map(|v| v.to_string())).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        let mut sorted = p.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 6);
    }

    #[test]
    fn rank_detection() {
        let good = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let bad = Tensor::matrix(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(full_column_rank(&good));
        assert!(!full_column_rank(&bad));
    }

    #[test]
    fn zero_variance_column_scores_zero() {
        let est = Tensor::matrix(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let truth = Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(mcc(&est, &truth).unwrap().mean, 0.0);
    }
}
