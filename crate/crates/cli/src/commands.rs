//! One function per CLI verb. Single-stage verbs exchange files through the
//! [`Store`]; composite verbs run everything in memory and write reports.

use std::fmt::Write as _;
use std::time::Instant;

use serde_json::json;
use xgen_core::data::LabeledDataset;
use xgen_core::diffusion::DiffusionPrior;
use xgen_core::eval::{compare_variants, mmd, EvalReport, SeedSamples};
use xgen_core::generation::{read_matrix_csv, write_matrix_csv, Generated};
use xgen_core::likelihood::{LikelihoodModel, Variant};
use xgen_numerics::Tensor;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::{self, run_seed, SeedRun};
use crate::store::{Store, TOOL_VERSION};

pub const SEEN: &str = "data/seen.csv";
pub const ORACLE: &str = "data/oracle.csv";
pub const PRIOR: &str = "models/prior.json";
pub const TARGETS: &str = "samples/targets.csv";
const X_HEADER: [&str; 3] = ["x1", "x2", "x3"];

pub fn model_path(v: Variant) -> String {
    format!("models/likelihood_{v}.json")
}

pub fn samples_path(v: Variant, method: &str) -> String {
    format!("samples/{v}_{method}.csv")
}

fn sidecar_path(v: Variant, method: &str) -> String {
    format!("samples/{v}_{method}.json")
}

fn selected(cfg: &RunConfig, only: &[Variant]) -> Result<Vec<Variant>> {
    if let Some(v) = only.iter().find(|v| !cfg.variants.contains(v)) {
        return Err(HarnessError::Config(format!("variant {v} is not enabled in the config")));
    }
    Ok(if only.is_empty() { cfg.variants.clone() } else { only.to_vec() })
}

fn write_json(store: &Store, rel: &str, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    store.write_bytes(rel, format!("{text}\n").as_bytes())
}

fn write_report(store: &Store, stem: &str, report: &EvalReport) -> Result<()> {
    store.write_bytes(&format!("reports/{stem}.txt"), report.to_text().as_bytes())?;
    store.write_bytes(&format!("reports/{stem}.csv"), report.to_csv().as_bytes())?;
    store.write_bytes(&format!("reports/{stem}.json"), format!("{}\n", report.to_json()?).as_bytes())
}

fn write_generated(store: &Store, g: &Generated) -> Result<()> {
    store.write_with(&samples_path(g.variant, &g.method), |p| write_matrix_csv(p, &X_HEADER, g.samples()))?;
    write_json(store, &sidecar_path(g.variant, &g.method), g)
}

/// `x1, x3, split` rows: the two-dimensional view of the selection split.
fn write_split_view(store: &Store, rel: &str, seen: &LabeledDataset, oracle: &LabeledDataset) -> Result<()> {
    let mut text = String::from("x1,x3,split\n");
    for (ds, name) in [(seen, "seen"), (oracle, "oracle")] {
        for i in 0..ds.len() {
            let x = ds.x_row(i);
            let _ = writeln!(text, "{},{},{name}", x[0], x[2]);
        }
    }
    store.write_bytes(rel, text.as_bytes())
}

fn context(cfg: &RunConfig, report: &mut EvalReport) {
    report.context.insert("tool_version".into(), json!(TOOL_VERSION));
    report.context.insert("config_hash".into(), json!(cfg.hash()));
    report.context.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
}

pub fn gen_data(cfg: &RunConfig, store: &Store) -> Result<String> {
    let t = Instant::now();
    store.reset()?;
    let split = pipeline::make_split(cfg, cfg.seed)?;
    store.write_with(SEEN, |p| split.seen.write_csv(p))?;
    store.write_with(ORACLE, |p| split.oracle.write_csv(p))?;
    write_split_view(store, "plots/fig3_split.csv", &split.seen, &split.oracle)?;
    store.record_timing("gen-data", t.elapsed().as_secs_f64())?;
    Ok(format!("seen {} rows, oracle {} rows\n", split.seen.len(), split.oracle.len()))
}

fn load_seen(store: &Store) -> Result<LabeledDataset> {
    Ok(LabeledDataset::read_csv(&store.require(SEEN, "gen-data")?)?)
}

/// Trains the selected variants (all enabled ones by default) and, when
/// `dps` is enabled and no variant filter is given, the diffusion prior.
pub fn train(cfg: &RunConfig, store: &Store, only: &[Variant]) -> Result<String> {
    let seen = load_seen(store)?;
    let mut out = String::new();
    for v in selected(cfg, only)? {
        let t = Instant::now();
        let model = pipeline::train_variant(cfg, cfg.seed, v, &seen)?;
        store.write_with(&model_path(v), |p| model.save(p))?;
        store.record_timing(&format!("train/{v}"), t.elapsed().as_secs_f64())?;
        let curve = &model.training.as_ref().expect("trained").curve;
        let _ = writeln!(out, "variant {v}: objective {:.4} -> {:.4}", curve.initial, curve.last());
    }
    if only.is_empty() && cfg.uses("dps") {
        let t = Instant::now();
        let prior = pipeline::train_prior(cfg, cfg.seed, &seen)?;
        store.write_with(PRIOR, |p| prior.save(p))?;
        store.record_timing("train/prior", t.elapsed().as_secs_f64())?;
        let curve = prior.curve.as_ref().expect("trained");
        let _ = writeln!(out, "prior: loss {:.4} -> {:.4}", curve.initial, curve.last());
    }
    Ok(out)
}

fn methods_selected(cfg: &RunConfig, v: Variant, only: &[String]) -> Vec<String> {
    pipeline::methods_for(cfg, v).into_iter().filter(|m| only.is_empty() || only.contains(m)).collect()
}

pub fn extrapolate(cfg: &RunConfig, store: &Store, only: &[Variant], only_methods: &[String]) -> Result<String> {
    for m in only_methods {
        if !cfg.uses(m) {
            return Err(HarnessError::Config(format!("method {m} is not enabled in the config")));
        }
    }
    let seen = load_seen(store)?;
    let targets = pipeline::targets(cfg, cfg.seed)?;
    store.write_with(TARGETS, |p| write_matrix_csv(p, &["z1", "z2"], &targets))?;
    let mut prior: Option<DiffusionPrior> = None;
    let mut out = String::new();
    for v in selected(cfg, only)? {
        let methods = methods_selected(cfg, v, only_methods);
        if methods.is_empty() {
            continue;
        }
        let model = LikelihoodModel::load_file(&store.require(&model_path(v), "train")?)?;
        for method in methods {
            if method == "dps" && prior.is_none() {
                prior = Some(DiffusionPrior::load_file(&store.require(PRIOR, "train")?)?);
            }
            let t = Instant::now();
            let g = pipeline::run_method(cfg, cfg.seed, &method, &model, prior.as_ref(), &seen, &targets)?;
            write_generated(store, &g)?;
            store.record_timing(&format!("extrapolate/{v}/{method}"), t.elapsed().as_secs_f64())?;
            let _ = writeln!(out, "{v}/{method}: {} samples, {} failed chains", g.samples().rows(), g.failed);
        }
    }
    Ok(out)
}

/// MMD of every enabled (variant, method) sample file against the oracle;
/// the only stage that reads the oracle split.
pub fn eval(cfg: &RunConfig, store: &Store) -> Result<(EvalReport, String)> {
    let t = Instant::now();
    let mut sets: Vec<(String, String, Tensor)> = Vec::new();
    for &v in &cfg.variants {
        for m in pipeline::methods_for(cfg, v) {
            let p = store.require(&samples_path(v, &m), "extrapolate")?;
            sets.push((v.to_string(), m, read_matrix_csv(&p)?));
        }
    }
    let seen = load_seen(store)?;
    let oracle = LabeledDataset::read_csv(&store.require(ORACLE, "gen-data")?)?;
    let seed = cfg.seed;
    let borrowed = sets.iter().map(|(r, c, m)| (r.clone(), c.clone(), m)).collect();
    let mut report = compare_variants(&[SeedSamples { seed, oracle: &oracle.x, sets: borrowed }])?;
    let h = report.bandwidths[&seed];
    report.insert("seen", "data", seed, mmd(&seen.x, &oracle.x, h)?);
    let mut hits = EvalReport::new("novel-hit-rate");
    for (r, c, m) in &sets {
        hits.insert(r, c, seed, cfg.generator.novel_fraction(m)?);
    }
    context(cfg, &mut report);
    context(cfg, &mut hits);
    write_report(store, "mmd", &report)?;
    write_report(store, "hit_rate", &hits)?;
    store.record_timing("eval", t.elapsed().as_secs_f64())?;
    Ok((report.clone(), format!("{}\n{}", report.to_text(), hits.to_text())))
}

/// Result of the multi-seed synthetic comparison.
pub struct Fig4 {
    pub mmd: EvalReport,
    pub hit_rate: EvalReport,
    pub failed: EvalReport,
    pub seconds: f64,
}

fn record_seed(run: &SeedRun, cfg: &RunConfig, fig: &mut Fig4) -> Result<()> {
    let sets = run.generated.iter().map(|g| (g.variant.to_string(), g.method.clone(), g.samples())).collect();
    let one = compare_variants(&[SeedSamples { seed: run.seed, oracle: &run.split.oracle.x, sets }])?;
    let h = one.bandwidths[&run.seed];
    fig.mmd.bandwidths.insert(run.seed, h);
    for c in &one.cells {
        fig.mmd.insert(&c.row, &c.column, run.seed, c.per_seed[&run.seed]);
    }
    fig.mmd.insert("seen", "data", run.seed, mmd(&run.split.seen.x, &run.split.oracle.x, h)?);
    for g in &run.generated {
        let (row, col) = (g.variant.to_string(), g.method.as_str());
        fig.hit_rate.insert(&row, col, run.seed, cfg.generator.novel_fraction(g.samples())?);
        fig.failed.insert(&row, col, run.seed, g.failed as f64 / cfg.generation.n_gen as f64);
    }
    Ok(())
}

/// Full pipeline for `eval.seeds` consecutive seeds starting at the master
/// seed; per-seed bandwidths are pooled over that seed's oracle and samples.
pub fn reproduce_fig4(cfg: &RunConfig, store: &Store) -> Result<(Fig4, String)> {
    let start = Instant::now();
    store.reset()?;
    let mut fig = Fig4 {
        mmd: EvalReport::new("mmd"),
        hit_rate: EvalReport::new("novel-hit-rate"),
        failed: EvalReport::new("failed-fraction"),
        seconds: 0.0,
    };
    let mut stage_seconds: Vec<(String, f64)> = Vec::new();
    for i in 0..cfg.eval.seeds {
        let seed = cfg.seed + i as u64;
        let run = run_seed(cfg, seed)?;
        record_seed(&run, cfg, &mut fig)?;
        if i == 0 {
            write_split_view(store, "plots/fig3_split.csv", &run.split.seen, &run.split.oracle)?;
            store.write_with("plots/fig4_oracle.csv", |p| write_matrix_csv(p, &X_HEADER, &run.split.oracle.x))?;
            for g in &run.generated {
                let rel = format!("plots/fig4_{}_{}.csv", g.variant, g.method);
                store.write_with(&rel, |p| write_matrix_csv(p, &X_HEADER, g.samples()))?;
            }
        }
        for (label, s) in run.timings {
            match stage_seconds.iter_mut().find(|(l, _)| *l == label) {
                Some(e) => e.1 += s,
                None => stage_seconds.push((label, s)),
            }
        }
    }
    for r in [&mut fig.mmd, &mut fig.hit_rate, &mut fig.failed] {
        context(cfg, r);
    }
    write_report(store, "fig4_mmd", &fig.mmd)?;
    write_report(store, "fig4_hit_rate", &fig.hit_rate)?;
    write_report(store, "fig4_failed", &fig.failed)?;
    fig.seconds = start.elapsed().as_secs_f64();
    for (label, s) in &stage_seconds {
        store.record_timing(&format!("reproduce-fig4/{label}"), *s)?;
    }
    store.record_timing("reproduce-fig4", fig.seconds)?;
    let text = format!("{}\n{}\n{}", fig.mmd.to_text(), fig.hit_rate.to_text(), fig.failed.to_text());
    Ok((fig, text))
}
