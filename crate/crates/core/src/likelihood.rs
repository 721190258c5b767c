//! Gaussian conditional models linking features and specifications.
//!
//! Forward variants (A, B, C) model `p(Z | X)`; reverse variants (D, E)
//! model `p(X | Z)`. Every head predicts a mean and a lower-triangular scale
//! factor `L` with diagonal `softplus(raw) + SIGMA_FLOOR`; a one-output head
//! is the ordinary univariate Gaussian with `sigma = L_11`.
//!
//! The per-row negative log-likelihood of a `k`-output head is
//! `1/2 |L^-1 r|^2 + 1/2 sum_j log L_jj + k/2 log 2 pi`, which reduces to
//! [`gaussian_nll`] summed over outputs when `L` is diagonal.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::{derive_seed, kernels, Rng, Tape, Tensor, Var};

use crate::data::LabeledDataset;
use crate::error::{contract, io_error, CoreError, Result};
use crate::fit::{fit, Curve, OptimConfig};
use crate::nn::{Cursor, Mlp};
use crate::norm::NormStats;

pub const SIGMA_FLOOR: f64 = 1e-3;
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `1/2 ((z - mu)/sigma)^2 + 1/2 log sigma + 1/2 log 2 pi`.
pub fn gaussian_nll(z: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= SIGMA_FLOOR) {
        return contract(format!("sigma {sigma} is below the floor {SIGMA_FLOOR}"));
    }
    let u = (z - mu) / sigma;
    Ok(0.5 * u * u + 0.5 * sigma.ln() + HALF_LN_2PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
    D,
    E,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::A, Variant::B, Variant::C, Variant::D, Variant::E];

    pub fn name(self) -> &'static str {
        match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
            Variant::D => "D",
            Variant::E => "E",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(family(name)?.variant())
    }

    pub fn is_reverse(self) -> bool {
        matches!(self, Variant::D | Variant::E)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Input mask of a head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mask {
    Dense,
    /// Fixed 0/1 indicator.
    Frozen {
        values: Vec<f64>,
    },
    /// `sigmoid(logits)`, trained with an L1 penalty.
    Learnable {
        logits: Tensor,
    },
}

impl Mask {
    pub fn values(&self, dim: usize) -> Vec<f64> {
        match self {
            Mask::Dense => vec![1.0; dim],
            Mask::Frozen { values } => values.clone(),
            Mask::Learnable { logits } => logits.data().iter().map(|&w| kernels::sigmoid(w)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// Target columns this head predicts, in order.
    pub outputs: Vec<usize>,
    pub mean: Mlp,
    /// Emits `k` raw diagonal entries followed by the `k(k-1)/2` strictly
    /// lower entries of `L`, row by row.
    pub scale: Mlp,
    pub mask: Mask,
}

impl Head {
    pub fn new(inputs: usize, outputs: Vec<usize>, hidden: &[usize], mask: Mask, rng: &mut Rng) -> Self {
        let k = outputs.len();
        let sizes = |out: usize| [&[inputs][..], hidden, &[out]].concat();
        let mean = Mlp::new(&sizes(k), rng);
        let scale = Mlp::new(&sizes(k + k * (k - 1) / 2), rng);
        Self { outputs, mean, scale, mask }
    }

    fn k(&self) -> usize {
        self.outputs.len()
    }

    fn n_tensors(&self) -> usize {
        self.mean.n_tensors() + self.scale.n_tensors() + matches!(self.mask, Mask::Learnable { .. }) as usize
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut out = self.mean.params();
        out.extend(self.scale.params());
        if let Mask::Learnable { logits } = &self.mask {
            out.push(logits);
        }
        out
    }

    fn load(&mut self, params: &[Tensor]) {
        let (m, s) = (self.mean.n_tensors(), self.scale.n_tensors());
        self.mean.load(&params[..m]);
        self.scale.load(&params[m..m + s]);
        if let Mask::Learnable { logits } = &mut self.mask {
            *logits = params[m + s].clone();
        }
    }

    fn masked_input(&self, input: &Tensor) -> Tensor {
        match &self.mask {
            Mask::Dense => input.clone(),
            Mask::Frozen { values } => kernels::mul_row(input, &Tensor::row_vector(values.clone())),
            Mask::Learnable { logits } => kernels::mul_row(input, &logits.map(kernels::sigmoid)),
        }
    }

    /// Splits this head's parameters off the cursor and applies the mask;
    /// the mask row is returned when learnable.
    #[allow(clippy::type_complexity)]
    fn masked_input_split<'a, 't>(
        &self,
        cur: &mut Cursor<'a, 't>,
        input: Var<'t>,
    ) -> (&'a [Var<'t>], &'a [Var<'t>], Var<'t>, Option<Var<'t>>) {
        let mean = cur.take(self.mean.n_tensors());
        let scale = cur.take(self.scale.n_tensors());
        let tape = input.tape();
        let (masked, mask) = match &self.mask {
            Mask::Dense => (input, None),
            Mask::Frozen { values } => (input.mul_row(tape.constant(Tensor::row_vector(values.clone()))), None),
            Mask::Learnable { .. } => {
                let m = cur.next().sigmoid();
                (input.mul_row(m), Some(m))
            }
        };
        (mean, scale, masked, mask)
    }

    fn masked_input_taped<'t>(&self, cur: &mut Cursor<'_, 't>, input: Var<'t>) -> (Var<'t>, Var<'t>, Option<Var<'t>>) {
        let (mean, scale, masked, mask) = self.masked_input_split(cur, input);
        (Mlp::forward_taped(mean, masked), Mlp::forward_taped(scale, masked), mask)
    }
}

/// Per-row negative log-likelihood (`n x 1`) of `target` under the head
/// output `(mu, raw)`.
fn head_nll<'t>(mu: Var<'t>, raw: Var<'t>, target: Var<'t>, k: usize) -> Var<'t> {
    let diag: Vec<Var<'t>> = (0..k).map(|j| raw.select_cols(&[j]).softplus().add_scalar(SIGMA_FLOOR)).collect();
    let mut u: Vec<Var<'t>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut num = target.select_cols(&[j]) - mu.select_cols(&[j]);
        for (i, &ui) in u.iter().enumerate() {
            num = num - raw.select_cols(&[k + j * (j - 1) / 2 + i]) * ui;
        }
        u.push(num / diag[j]);
    }
    let mut total = u[0].square().scale(0.5) + diag[0].ln().scale(0.5);
    for j in 1..k {
        total = total + u[j].square().scale(0.5) + diag[j].ln().scale(0.5);
    }
    total.add_scalar(k as f64 * HALF_LN_2PI)
}

/// Lower-triangular factor for one row of raw scale output.
fn cholesky_row(raw: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; k]; k];
    for j in 0..k {
        l[j][j] = kernels::softplus(raw[j]) + SIGMA_FLOOR;
        for i in 0..j {
            l[j][i] = raw[k + j * (j - 1) / 2 + i];
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskChoice {
    /// Learnable masks initialized at `mask_init_logit`.
    Learnable,
    /// Frozen to the parent sets in `parents`.
    True,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub hidden: Vec<usize>,
    pub mask: MaskChoice,
    pub mask_init_logit: f64,
    /// Feature parents of each specification, used by frozen masks.
    pub parents: Vec<Vec<usize>>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            mask: MaskChoice::True,
            mask_init_logit: 2.0,
            parents: vec![vec![0, 1], vec![1, 2]],
        }
    }
}

/// A named way of assembling heads.
pub trait LikelihoodFamily: Sync {
    fn variant(&self) -> Variant;
    fn summary(&self) -> &'static str;
    /// Heads for `d_x` features and `d_z` specifications.
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>>;
}

struct SparseForward;
struct DenseForward;
struct JointForward;
struct JointReverse;
struct FactorizedReverse;

impl LikelihoodFamily for SparseForward {
    fn variant(&self) -> Variant {
        Variant::A
    }
    fn summary(&self) -> &'static str {
        "one Gaussian head per specification over masked features"
    }
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>> {
        (0..d_z)
            .map(|i| {
                let mask = match options.mask {
                    MaskChoice::Learnable => {
                        Mask::Learnable { logits: Tensor::full(&[1, d_x], options.mask_init_logit) }
                    }
                    MaskChoice::True => {
                        let parents = options.parents.get(i).ok_or_else(|| {
                            CoreError::Contract(format!("no parent set given for specification {}", i + 1))
                        })?;
                        if parents.iter().any(|&p| p >= d_x) {
                            return contract(format!("parent set {parents:?} out of range"));
                        }
                        Mask::Frozen { values: (0..d_x).map(|j| parents.contains(&j) as u8 as f64).collect() }
                    }
                };
                Ok(Head::new(d_x, vec![i], &options.hidden, mask, rng))
            })
            .collect()
    }
}

impl LikelihoodFamily for DenseForward {
    fn variant(&self) -> Variant {
        Variant::B
    }
    fn summary(&self) -> &'static str {
        "one Gaussian head per specification over all features"
    }
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>> {
        Ok((0..d_z).map(|i| Head::new(d_x, vec![i], &options.hidden, Mask::Dense, rng)).collect())
    }
}

impl LikelihoodFamily for JointForward {
    fn variant(&self) -> Variant {
        Variant::C
    }
    fn summary(&self) -> &'static str {
        "one full-covariance Gaussian over all specifications"
    }
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>> {
        Ok(vec![Head::new(d_x, (0..d_z).collect(), &options.hidden, Mask::Dense, rng)])
    }
}

impl LikelihoodFamily for JointReverse {
    fn variant(&self) -> Variant {
        Variant::D
    }
    fn summary(&self) -> &'static str {
        "one full-covariance Gaussian over all features given the specifications"
    }
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>> {
        Ok(vec![Head::new(d_z, (0..d_x).collect(), &options.hidden, Mask::Dense, rng)])
    }
}

impl LikelihoodFamily for FactorizedReverse {
    fn variant(&self) -> Variant {
        Variant::E
    }
    fn summary(&self) -> &'static str {
        "one Gaussian head per feature given the specifications"
    }
    fn heads(&self, d_x: usize, d_z: usize, options: &ModelOptions, rng: &mut Rng) -> Result<Vec<Head>> {
        Ok((0..d_x).map(|j| Head::new(d_z, vec![j], &options.hidden, Mask::Dense, rng)).collect())
    }
}

static FAMILIES: [&dyn LikelihoodFamily; 5] =
    [&SparseForward, &DenseForward, &JointForward, &JointReverse, &FactorizedReverse];

pub fn families() -> &'static [&'static dyn LikelihoodFamily] {
    &FAMILIES
}

pub fn family(name: &str) -> Result<&'static dyn LikelihoodFamily> {
    FAMILIES.iter().copied().find(|f| f.variant().name() == name).ok_or_else(|| CoreError::Unknown {
        kind: "likelihood variant",
        name: name.to_string(),
        expected: Variant::ALL.iter().map(|v| v.name()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Weight of the mask sparsity penalty.
    pub beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 128, lr: 2e-3, beta: 5e-4 }
    }
}

impl TrainConfig {
    pub fn optim(&self) -> OptimConfig {
        OptimConfig { epochs: self.epochs, batch_size: self.batch_size, lr: self.lr, cosine: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Training {
    pub config: TrainConfig,
    pub seed: u64,
    pub curve: Curve,
}

/// Per-row predictions in normalized units: means and marginal standard
/// deviations, both `n x d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Tensor,
    pub sigma: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    pub variant: Variant,
    pub heads: Vec<Head>,
    pub x_norm: NormStats,
    pub z_norm: NormStats,
    pub training: Option<Training>,
}

impl LikelihoodModel {
    /// Fresh model with normalization statistics from `seen`.
    pub fn build(
        family: &dyn LikelihoodFamily,
        options: &ModelOptions,
        seen: &LabeledDataset,
        rng: &mut Rng,
    ) -> Result<Self> {
        let x_norm = NormStats::fit(&seen.x)?;
        let z_norm = NormStats::fit(&seen.z)?;
        let heads = family.heads(x_norm.dim(), z_norm.dim(), options, rng)?;
        Ok(Self { variant: family.variant(), heads, x_norm, z_norm, training: None })
    }

    /// Builds and trains a model; initialization and minibatch order are
    /// separate streams of `seed`.
    pub fn fit(
        family: &dyn LikelihoodFamily,
        options: &ModelOptions,
        seen: &LabeledDataset,
        config: &TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::build(family, options, seen, &mut Rng::new(seed).split("init"))?;
        model.train(seen, config, derive_seed(seed, "train"))?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        if self.variant.is_reverse() {
            self.z_norm.dim()
        } else {
            self.x_norm.dim()
        }
    }

    pub fn output_dim(&self) -> usize {
        self.heads.iter().map(|h| h.k()).sum()
    }

    fn input_norm(&self) -> &NormStats {
        if self.variant.is_reverse() {
            &self.z_norm
        } else {
            &self.x_norm
        }
    }

    fn output_norm(&self) -> &NormStats {
        if self.variant.is_reverse() {
            &self.x_norm
        } else {
            &self.z_norm
        }
    }

    /// Normalized (input, target) pair for a dataset in this model's
    /// direction.
    pub fn training_pair(&self, ds: &LabeledDataset) -> (Tensor, Tensor) {
        if self.variant.is_reverse() {
            (self.z_norm.normalize(&ds.z), self.x_norm.normalize(&ds.x))
        } else {
            (self.x_norm.normalize(&ds.x), self.z_norm.normalize(&ds.z))
        }
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.heads.iter().flat_map(|h| h.params()).cloned().collect()
    }

    pub fn n_tensors(&self) -> usize {
        self.heads.iter().map(|h| h.n_tensors()).sum()
    }

    pub fn load(&mut self, params: &[Tensor]) {
        let mut at = 0;
        for h in &mut self.heads {
            let n = h.n_tensors();
            h.load(&params[at..at + n]);
            at += n;
        }
        assert_eq!(at, params.len());
    }

    /// Mean negative log-likelihood over rows and the L1 mask norm, on the
    /// tape. `L_s` counts every mask, learnable or not.
    pub fn objective_parts<'t>(&self, vars: &[Var<'t>], input: Var<'t>, target: Var<'t>) -> (Var<'t>, Var<'t>) {
        let tape = input.tape();
        let mut cur = Cursor::new(vars);
        let mut nll: Option<Var<'t>> = None;
        let mut ls = tape.constant(Tensor::scalar(0.0));
        for head in &self.heads {
            let (mu, raw, mask) = head.masked_input_taped(&mut cur, input);
            let k = head.k();
            let t = target.select_cols(&head.outputs);
            let rows = head_nll(mu, raw, t, k);
            nll = Some(match nll {
                Some(acc) => acc + rows,
                None => rows,
            });
            ls = match (mask, &head.mask) {
                (Some(m), _) => ls + m.sum(),
                (None, Mask::Frozen { values }) => ls.add_scalar(values.iter().sum()),
                (None, _) => ls,
            };
        }
        debug_assert!(cur.finished());
        (nll.expect("at least one head").mean(), ls)
    }

    /// `L_m + beta L_s` on the tape.
    pub fn objective<'t>(&self, vars: &[Var<'t>], input: Var<'t>, target: Var<'t>, beta: f64) -> Var<'t> {
        let (nll, ls) = self.objective_parts(vars, input, target);
        if self.heads.iter().any(|h| matches!(h.mask, Mask::Learnable { .. })) {
            nll + ls.scale(beta)
        } else {
            nll
        }
    }

    /// `(L_m, L_s)` for normalized inputs and targets.
    pub fn loss_parts(&self, input: &Tensor, target: &Tensor) -> (f64, f64) {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = self.params().into_iter().map(|p| tape.constant(p)).collect();
        let (nll, ls) = self.objective_parts(&vars, tape.constant(input.clone()), tape.constant(target.clone()));
        (nll.value().item(), ls.value().item())
    }

    pub fn train(&mut self, seen: &LabeledDataset, config: &TrainConfig, seed: u64) -> Result<()> {
        if config.beta < 0.0 {
            return contract("sparsity weight must be nonnegative");
        }
        let (input, target) = self.training_pair(seen);
        let mut params = self.params();
        let mut rng = Rng::new(seed);
        let beta = config.beta;
        let model = &*self;
        let curve = fit(
            &format!("likelihood variant {}", self.variant),
            &mut params,
            input.rows(),
            &config.optim(),
            &mut rng,
            |tape, vars, rows, _| {
                let x = tape.constant(input.select_rows(rows));
                let z = tape.constant(target.select_rows(rows));
                model.objective(vars, x, z, beta)
            },
        )?;
        self.load(&params);
        self.training = Some(Training { config: *config, seed, curve });
        Ok(())
    }

    /// Predictions for normalized inputs.
    pub fn predict_normalized(&self, input: &Tensor) -> Prediction {
        let n = input.rows();
        let d = self.output_dim();
        let mut mean = Tensor::zeros(&[n, d]);
        let mut sigma = Tensor::zeros(&[n, d]);
        for head in &self.heads {
            let masked = head.masked_input(input);
            let mu = head.mean.forward(&masked);
            let raw = head.scale.forward(&masked);
            let k = head.k();
            for r in 0..n {
                let l = cholesky_row(raw.row(r), k);
                for (j, &col) in head.outputs.iter().enumerate() {
                    mean.set(r, col, mu.get(r, j));
                    sigma.set(r, col, l[j][..=j].iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
        }
        Prediction { mean, sigma }
    }

    /// Predicted means in raw units for raw inputs.
    pub fn predict(&self, input: &Tensor) -> Tensor {
        let p = self.predict_normalized(&self.input_norm().normalize(input));
        self.output_norm().denormalize(&p.mean)
    }

    /// Predicted means (normalized, `n x d_out`) for a taped normalized
    /// input, parameters held constant.
    pub fn mean_taped<'t>(&self, input: Var<'t>) -> Var<'t> {
        let tape = input.tape();
        let params: Vec<Var<'t>> = self.params().into_iter().map(|p| tape.constant(p)).collect();
        let mut cur = Cursor::new(&params);
        let mut cols: Vec<Var<'t>> = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        for head in &self.heads {
            let (mean, _, masked, _) = head.masked_input_split(&mut cur, input);
            cols.push(Mlp::forward_taped(mean, masked));
            order.extend(&head.outputs);
        }
        let all = if cols.len() == 1 { cols[0] } else { Var::concat_cols(&cols) };
        if order.iter().enumerate().all(|(i, &c)| i == c) {
            all
        } else {
            let mut inverse = vec![0; order.len()];
            for (pos, &c) in order.iter().enumerate() {
                inverse[c] = pos;
            }
            all.select_cols(&inverse)
        }
    }

    /// Effective mask values per head.
    pub fn masks(&self) -> Vec<Vec<f64>> {
        let d = self.input_dim();
        self.heads.iter().map(|h| h.mask.values(d)).collect()
    }

    /// Discovered structure: mask entries above one half.
    pub fn structure(&self) -> Vec<Vec<bool>> {
        self.masks().iter().map(|m| m.iter().map(|&v| v > 0.5).collect()).collect()
    }

    /// Draws one feature sample per row of raw specifications `z` from a
    /// reverse model, `x ~ N(mu(z), L(z) L(z)^T)`, returned in raw units.
    pub fn sample_reverse(&self, z: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        if !self.variant.is_reverse() {
            return contract(format!("variant {} does not model features given specifications", self.variant));
        }
        let input = self.z_norm.normalize(z);
        let n = input.rows();
        let mut out = Tensor::zeros(&[n, self.output_dim()]);
        for head in &self.heads {
            let masked = head.masked_input(&input);
            let mu = head.mean.forward(&masked);
            let raw = head.scale.forward(&masked);
            let k = head.k();
            for r in 0..n {
                let l = cholesky_row(raw.row(r), k);
                let eps: Vec<f64> = (0..k).map(|_| rng.normal_scalar()).collect();
                for (j, &col) in head.outputs.iter().enumerate() {
                    let noise: f64 = (0..=j).map(|i| l[j][i] * eps[i]).sum();
                    out.set(r, col, mu.get(r, j) + noise);
                }
            }
        }
        Ok(self.x_norm.denormalize(&out))
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_closed_form_values() {
        assert!((gaussian_nll(1.0, 1.0, 1.0).unwrap() - 0.918_94).abs() < 1e-5);
        assert!((gaussian_nll(2.0, 1.0, 1.0).unwrap() - 1.418_94).abs() < 1e-5);
        assert!((gaussian_nll(3.0, 1.0, 2.0).unwrap() - 1.765_51).abs() < 1e-5);
        assert!(gaussian_nll(0.0, 0.0, 1e-4).is_err());
        assert!(gaussian_nll(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn registry_lookup() {
        for v in Variant::ALL {
            assert_eq!(family(v.name()).unwrap().variant(), v);
        }
        assert!(matches!(family("F"), Err(CoreError::Unknown { .. })));
    }

    #[test]
    fn cholesky_diagonal_is_floored() {
        let l = cholesky_row(&[-800.0, 0.0, 0.5], 2);
        assert_eq!(l[0][0], SIGMA_FLOOR);
        assert_eq!(l[1][0], 0.5);
        assert_eq!(l[0][1], 0.0);
    }
}
