//! Minibatch Adam loop shared by every trained model.

use serde::{Deserialize, Serialize};
use xgen_numerics::{value_and_grad, Adam, AdamConfig, NumericsError, Rng, Tape, Tensor, Var};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Anneal the step size to zero along a half cosine over all steps.
    pub cosine: bool,
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CoreError::Contract(format!("invalid optimizer config {self:?}")));
        }
        Ok(())
    }
}

/// Training record: full-data objective before training, then the mean
/// minibatch objective of every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub initial: f64,
    pub epochs: Vec<f64>,
}

impl Curve {
    pub fn last(&self) -> f64 {
        self.epochs.last().copied().unwrap_or(self.initial)
    }
}

/// Minimizes `loss(tape, params, batch_rows)` over `n` rows. The closure may
/// draw from `rng` (the diffusion objective samples noise per batch).
pub fn fit<F>(
    stage: &str,
    params: &mut [Tensor],
    n: usize,
    config: &OptimConfig,
    rng: &mut Rng,
    mut loss: F,
) -> Result<Curve>
where
    F: for<'t> FnMut(&'t Tape, &[Var<'t>], &[usize], &mut Rng) -> Var<'t>,
{
    config.validate()?;
    if n == 0 {
        return Err(CoreError::Contract(format!("{stage}: no training rows")));
    }
    let mut eval_rng = rng.split("initial-objective");
    let mut total = 0.0;
    for chunk in (0..n).collect::<Vec<_>>().chunks(config.batch_size) {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = params.iter().map(|p| tape.constant(p.clone())).collect();
        total += loss(&tape, &vars, chunk, &mut eval_rng).value().item() * chunk.len() as f64;
    }
    let initial = total / n as f64;
    let failure = |epoch: usize, last: f64| CoreError::TrainingFailure {
        stage: stage.to_string(),
        epoch,
        last_finite_loss: last,
    };
    if !initial.is_finite() {
        return Err(failure(0, f64::NAN));
    }
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr), &params.iter().collect::<Vec<_>>());
    let mut curve = Curve { initial, epochs: Vec::with_capacity(config.epochs) };
    let mut last = initial;
    let total_steps = (config.epochs * n.div_ceil(config.batch_size)) as f64;
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let order = rng.permutation(n);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let result = value_and_grad(params, |tape, vars| loss(tape, vars, batch, rng));
            let (value, grads) = match result {
                Ok(v) => v,
                Err(NumericsError::NumericFailure { .. }) => return Err(failure(epoch, last)),
                Err(e) => return Err(e.into()),
            };
            if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(failure(epoch, last));
            }
            if config.cosine {
                adam.set_lr(0.5 * config.lr * (1.0 + (std::f64::consts::PI * step as f64 / total_steps).cos()));
            }
            step += 1;
            let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
            adam.step(&mut refs, &grads)?;
            sum += value * batch.len() as f64;
            last = value;
        }
        curve.epochs.push(sum / n as f64);
    }
    Ok(curve)
}
