//! In-memory stages shared by the single-stage commands and the composite
//! reproductions. Every stage seed is `derive_seed(seed, label)` with labels
//! such as `likelihood/A` or `extrapolate/A/opt`.

use std::time::Instant;

use xgen_core::data::{generate, split_by_selection, LabeledDataset, Split};
use xgen_core::diffusion::DiffusionPrior;
use xgen_core::generation::{draw_targets, extrapolator, Generated, GenerationInputs};
use xgen_core::likelihood::{family, LikelihoodModel, Variant};
use xgen_numerics::{derive_seed, Tensor};

use crate::config::RunConfig;
use crate::error::Result;

pub fn make_split(cfg: &RunConfig, seed: u64) -> Result<Split> {
    let ds = generate(&cfg.generator, derive_seed(seed, "data"))?;
    Ok(split_by_selection(&ds, &cfg.generator)?)
}

pub fn train_variant(cfg: &RunConfig, seed: u64, variant: Variant, seen: &LabeledDataset) -> Result<LikelihoodModel> {
    let label = format!("likelihood/{variant}");
    Ok(LikelihoodModel::fit(
        family(variant.name())?,
        &cfg.model,
        seen,
        cfg.train_config(variant),
        derive_seed(seed, &label),
    )?)
}

pub fn train_prior(cfg: &RunConfig, seed: u64, seen: &LabeledDataset) -> Result<DiffusionPrior> {
    Ok(DiffusionPrior::fit(&seen.x, &cfg.prior, derive_seed(seed, "prior"))?)
}

/// Raw targets shared by every variant and method of one seed.
pub fn targets(cfg: &RunConfig, seed: u64) -> Result<Tensor> {
    Ok(draw_targets(&cfg.generation, &cfg.generator, derive_seed(seed, "targets"))?)
}

/// Every configured method the variant supports, in config order.
pub fn methods_for(cfg: &RunConfig, variant: Variant) -> Vec<String> {
    cfg.methods.iter().filter(|m| extrapolator(m).map(|e| e.supports(variant)).unwrap_or(false)).cloned().collect()
}

pub fn run_method(
    cfg: &RunConfig,
    seed: u64,
    method: &str,
    model: &LikelihoodModel,
    prior: Option<&DiffusionPrior>,
    seen: &LabeledDataset,
    targets: &Tensor,
) -> Result<Generated> {
    let inputs = GenerationInputs { model, prior, seen, config: &cfg.generation, targets };
    let label = format!("extrapolate/{}/{method}", model.variant);
    Ok(extrapolator(method)?.run(&inputs, derive_seed(seed, &label))?)
}

/// Wall-clock seconds per stage label.
pub type Timings = Vec<(String, f64)>;

pub struct SeedRun {
    pub seed: u64,
    pub split: Split,
    pub models: Vec<LikelihoodModel>,
    pub prior: Option<DiffusionPrior>,
    pub targets: Tensor,
    pub generated: Vec<Generated>,
    pub timings: Timings,
}

/// Data, every configured model, and every supported (variant, method)
/// cell for one seed.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedRun> {
    let mut timings = Timings::new();
    let mut timed = |label: String, start: Instant| timings.push((label, start.elapsed().as_secs_f64()));
    let t = Instant::now();
    let split = make_split(cfg, seed)?;
    timed("gen-data".into(), t);
    let mut models = Vec::new();
    for &v in &cfg.variants {
        let t = Instant::now();
        models.push(train_variant(cfg, seed, v, &split.seen)?);
        timed(format!("train/{v}"), t);
    }
    let prior = if cfg.uses("dps") && cfg.variants.iter().any(|v| !v.is_reverse()) {
        let t = Instant::now();
        let p = train_prior(cfg, seed, &split.seen)?;
        timed("train/prior".into(), t);
        Some(p)
    } else {
        None
    };
    let targets = targets(cfg, seed)?;
    let mut generated = Vec::new();
    for model in &models {
        for method in methods_for(cfg, model.variant) {
            let t = Instant::now();
            generated.push(run_method(cfg, seed, &method, model, prior.as_ref(), &split.seen, &targets)?);
            timed(format!("extrapolate/{}/{method}", model.variant), t);
        }
    }
    Ok(SeedRun { seed, split, models, prior, targets, generated, timings })
}
