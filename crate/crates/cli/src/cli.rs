//! Argument parsing and verb dispatch for the `xgen` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use xgen_core::likelihood::Variant;

use crate::commands;
use crate::config::RunConfig;
use crate::error::Result;
use crate::exact_demo::exact_demo;
use crate::latent_demo::{latent_demo, reproduce_tables};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "xgen", version, about = "Extrapolated generation experiments")]
pub struct Cli {
    /// Run config (JSON). Defaults apply to every omitted key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config and XGEN_OUT.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Verb,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Subcommand)]
pub enum Verb {
    /// Draw the synthetic population and split it into seen and oracle data.
    GenData,
    /// Train likelihood models (and the diffusion prior when dps is enabled).
    Train {
        /// Restrict to these variants; repeatable.
        #[arg(long = "variant", value_parser = parse_variant)]
        variants: Vec<Variant>,
    },
    /// Generate samples for the novel specification targets.
    Extrapolate {
        /// Restrict to these variants; repeatable.
        #[arg(long = "variant", value_parser = parse_variant)]
        variants: Vec<Variant>,
        /// Restrict to these methods (opt, dps, reverse); repeatable.
        #[arg(long = "method")]
        methods: Vec<String>,
    },
    /// MMD of every sample file against the oracle split.
    Eval,
    /// Exact identification on discrete nets: `fig3a`, `fig3b`, or net files.
    ExactDemo {
        /// Builtin net names or net file paths; both builtins when omitted.
        nets: Vec<String>,
    },
    /// Latent recovery from mixed observations for one seed.
    LatentDemo,
    /// The synthetic comparison over `eval.seeds` seeds.
    ReproduceFig4,
    /// Latent recovery and extrapolation tables over `eval.seeds` seeds.
    ReproduceTables,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::GenData => "gen-data",
            Verb::Train { .. } => "train",
            Verb::Extrapolate { .. } => "extrapolate",
            Verb::Eval => "eval",
            Verb::ExactDemo { .. } => "exact-demo",
            Verb::LatentDemo => "latent-demo",
            Verb::ReproduceFig4 => "reproduce-fig4",
            Verb::ReproduceTables => "reproduce-tables",
        }
    }
}

/// Config with the command-line seed applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs one verb against the output store and returns the human summary.
pub fn execute(verb: &Verb, cfg: &RunConfig, store: &Store) -> Result<String> {
    let text = match verb {
        Verb::GenData => commands::gen_data(cfg, store)?,
        Verb::Train { variants } => commands::train(cfg, store, variants)?,
        Verb::Extrapolate { variants, methods } => commands::extrapolate(cfg, store, variants, methods)?,
        Verb::Eval => commands::eval(cfg, store)?.1,
        Verb::ExactDemo { nets } => exact_demo(cfg, store, nets)?.1,
        Verb::LatentDemo => latent_demo(cfg, store)?.1,
        Verb::ReproduceFig4 => commands::reproduce_fig4(cfg, store)?.1,
        Verb::ReproduceTables => reproduce_tables(cfg, store)?.1,
    };
    store.write_bytes("config.json", format!("{}\n", cfg.to_json()).as_bytes())?;
    Ok(text)
}

/// Resolves config and output directory, then runs the verb.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let store = Store::new(&cfg.resolve_out(cli.out.as_deref()), &cfg.hash())?;
    execute(&cli.command, &cfg, &store)
}
