//! Run configuration: one JSON file holds every knob of a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xgen_core::data::GeneratorConfig;
use xgen_core::diffusion::PriorConfig;
use xgen_core::generation::{extrapolator, GenerationConfig};
use xgen_core::latent::{DownstreamConfig, VaeConfig};
use xgen_core::likelihood::{ModelOptions, TrainConfig, Variant};

use crate::error::{io_error, HarnessError, Result};

/// Environment variable consulted for the output directory when neither
/// `--out` nor the config names one.
pub const OUT_ENV: &str = "XGEN_OUT";
pub const DEFAULT_OUT: &str = "xgen-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct TrainSection {
    pub default: TrainConfig,
    /// Per-variant replacements for `default`.
    pub overrides: BTreeMap<Variant, TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Seeds in composite commands: `seed, seed + 1, ...`.
    pub seeds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { seeds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentConfig {
    pub obs_dim: usize,
    pub vae: VaeConfig,
    /// Run generation on the recovered latents after training.
    pub downstream: bool,
    /// Also run variant A on the true latents of the same seeds, for the
    /// recovered-versus-given comparison.
    pub compare_given: bool,
    pub pipeline: DownstreamConfig,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            obs_dim: 20,
            vae: VaeConfig::default(),
            downstream: true,
            compare_given: true,
            pipeline: DownstreamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactDemoConfig {
    /// Random CPT draws per builtin topology.
    pub nets: usize,
    pub leakage: Vec<f64>,
}

impl Default for ExactDemoConfig {
    fn default() -> Self {
        Self { nets: 20, leakage: vec![0.1, 0.01, 0.001] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    /// Output directory. Not part of the config hash.
    pub out: Option<PathBuf>,
    pub generator: GeneratorConfig,
    /// Stage toggles: which likelihood variants and generation methods run.
    pub variants: Vec<Variant>,
    pub methods: Vec<String>,
    pub model: ModelOptions,
    pub train: TrainSection,
    pub prior: PriorConfig,
    pub generation: GenerationConfig,
    pub eval: EvalConfig,
    pub latent: LatentConfig,
    pub exact: ExactDemoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            generator: GeneratorConfig::default(),
            variants: Variant::ALL.to_vec(),
            methods: vec!["opt".into(), "dps".into(), "reverse".into()],
            model: ModelOptions::default(),
            train: TrainSection::default(),
            prior: PriorConfig::default(),
            generation: GenerationConfig::default(),
            eval: EvalConfig::default(),
            latent: LatentConfig::default(),
            exact: ExactDemoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.generator.validate()?;
        self.generation.target.validate()?;
        if self.variants.is_empty() {
            return bad("no variants selected".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        for m in &self.methods {
            extrapolator(m)?;
        }
        if self.eval.seeds == 0 {
            return bad("eval.seeds must be positive".into());
        }
        if self.latent.obs_dim < 3 {
            return bad("latent.obs_dim must be at least the number of features".into());
        }
        Ok(())
    }

    pub fn train_config(&self, variant: Variant) -> &TrainConfig {
        self.train.overrides.get(&variant).unwrap_or(&self.train.default)
    }

    pub fn uses(&self, method: &str) -> bool {
        self.methods.iter().any(|m| m == method)
    }

    /// SHA-256 of the canonical JSON of everything but the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Output directory: `--out`, then the config, then `$XGEN_OUT`, then
    /// `./xgen-out`.
    pub fn resolve_out(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out {
            return p.clone();
        }
        std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"sed": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"generation": {"opt": {"lr": 0.1, "step": 3}}}"#).is_err());
        assert_eq!(RunConfig::from_json(r#"{"seed": 3}"#).unwrap().seed, 3);
    }

    #[test]
    fn output_dir_does_not_change_the_hash() {
        let a = RunConfig::default();
        let b = RunConfig { out: Some("elsewhere".into()), ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig { seed: 1, ..RunConfig::default() }.hash());
    }
}
