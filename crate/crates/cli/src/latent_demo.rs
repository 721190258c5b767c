//! `latent-demo` and `reproduce-tables`: latent recovery from mixed
//! observations, then extrapolation on the recovered latents.

use std::time::Instant;

use xgen_core::data::LabeledDataset;
use xgen_core::eval::EvalReport;
use xgen_core::generation::draw_targets;
use xgen_core::latent::{
    downstream_extrapolation, mcc, mix, mix_matrix, write_observations, MccReport, Mixing, RecoveredTask, TwinVae,
};
use xgen_numerics::derive_seed;

use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline::make_split;
use crate::store::Store;

const X_NAMES: [&str; 3] = ["X1", "X2", "X3"];
const Z_NAMES: [&str; 2] = ["Z1", "Z2"];

pub struct LatentSeed {
    pub seed: u64,
    pub mixing: Mixing,
    pub vae: TwinVae,
    pub mcc_x: MccReport,
    pub mcc_z: MccReport,
    /// `(method, mmd)` on recovered latents against the encoded oracle.
    pub recovered: Vec<(String, f64)>,
    /// `(method, mmd)` with the true latents given.
    pub given: Vec<(String, f64)>,
}

/// `(method, mmd)` from a single-seed report.
fn mmd_pairs(report: &EvalReport) -> Vec<(String, f64)> {
    report.cells.iter().filter_map(|c| Some((c.column.clone(), *c.per_seed.values().next()?))).collect()
}

pub fn run_latent_seed(cfg: &RunConfig, seed: u64, downstream: bool) -> Result<LatentSeed> {
    let lc = &cfg.latent;
    let split = make_split(cfg, seed)?;
    let mixing = Mixing::random(lc.obs_dim, 3, 2, derive_seed(seed, "latent/mixing"))?;
    let (y_x, y_z) = mix(&split.seen, &mixing)?;
    let mut vae = TwinVae::new(&y_x, &y_z, 3, 2, &lc.vae, derive_seed(seed, "latent/vae-init"))?;
    vae.train(&y_x, &y_z, derive_seed(seed, "latent/vae-train"))?;
    let x_hat = vae.encode_x(&y_x);
    let z_hat = vae.encode_z(&y_z);
    let mcc_x = mcc(&x_hat, &split.seen.x)?;
    let mcc_z = mcc(&z_hat, &split.seen.z)?;
    let mut out = LatentSeed { seed, mixing, vae, mcc_x, mcc_z, recovered: Vec::new(), given: Vec::new() };
    if !downstream {
        return Ok(out);
    }
    let p = &lc.pipeline;
    let targets = draw_targets(&p.generation, &cfg.generator, derive_seed(seed, "latent/targets"))?;
    let seen_hat = LabeledDataset::new(x_hat, z_hat, split.seen.s.clone())?;
    let oracle_hat = out.vae.encode_x(&mix_matrix(&split.oracle.x, &out.mixing.a_x)?);
    let targets_hat = out.vae.encode_z(&mix_matrix(&targets, &out.mixing.a_z)?);
    let task = RecoveredTask { seen: &seen_hat, oracle_x: &oracle_hat, targets: &targets_hat };
    let (report, _) = downstream_extrapolation(&task, p, derive_seed(seed, "latent/downstream"))?;
    out.recovered = mmd_pairs(&report);
    if lc.compare_given {
        let task = RecoveredTask { seen: &split.seen, oracle_x: &split.oracle.x, targets: &targets };
        let (report, _) = downstream_extrapolation(&task, p, derive_seed(seed, "latent/given"))?;
        out.given = mmd_pairs(&report);
    }
    Ok(out)
}

pub struct Tables {
    pub mcc: EvalReport,
    pub mmd: EvalReport,
    pub seconds: f64,
}

fn tables(cfg: &RunConfig, runs: &[LatentSeed]) -> Tables {
    let mut t = Tables { mcc: EvalReport::new("mcc"), mmd: EvalReport::new("mmd"), seconds: 0.0 };
    for r in runs {
        for (name, v) in X_NAMES.iter().zip(&r.mcc_x.matched).chain(Z_NAMES.iter().zip(&r.mcc_z.matched)) {
            t.mcc.insert(name, "recovered", r.seed, *v);
        }
        for (row, pairs) in [("recovered", &r.recovered), ("given", &r.given)] {
            for (method, v) in pairs {
                t.mmd.insert(row, method, r.seed, *v);
            }
        }
    }
    for rep in [&mut t.mcc, &mut t.mmd] {
        rep.context.insert("config_hash".into(), serde_json::json!(cfg.hash()));
    }
    t
}

fn write_tables(store: &Store, stem: &str, t: &Tables) -> Result<String> {
    let mut text = String::new();
    for (name, rep) in [("mcc", &t.mcc), ("mmd", &t.mmd)] {
        if rep.cells.is_empty() {
            continue;
        }
        let body = rep.to_text();
        store.write_bytes(&format!("reports/{stem}_{name}.txt"), body.as_bytes())?;
        store.write_bytes(&format!("reports/{stem}_{name}.csv"), rep.to_csv().as_bytes())?;
        store.write_bytes(&format!("reports/{stem}_{name}.json"), format!("{}\n", rep.to_json()?).as_bytes())?;
        text.push_str(&body);
        text.push('\n');
    }
    Ok(text)
}

/// One seed at the master seed; also writes the mixed observations and the
/// trained autoencoder.
pub fn latent_demo(cfg: &RunConfig, store: &Store) -> Result<(Tables, String)> {
    let start = Instant::now();
    let run = run_latent_seed(cfg, cfg.seed, cfg.latent.downstream)?;
    let split = make_split(cfg, cfg.seed)?;
    let (y_x, y_z) = mix(&split.seen, &run.mixing)?;
    store.write_with("data/latent_observations.csv", |p| write_observations(p, &y_x, &y_z))?;
    store.write_with("models/twin_vae.json", |p| run.vae.save(p))?;
    let mut t = tables(cfg, std::slice::from_ref(&run));
    let text = write_tables(store, "latent", &t)?;
    t.seconds = start.elapsed().as_secs_f64();
    store.record_timing("latent-demo", t.seconds)?;
    Ok((t, text))
}

/// Recovery and extrapolation tables over `eval.seeds` seeds.
pub fn reproduce_tables(cfg: &RunConfig, store: &Store) -> Result<(Tables, String)> {
    let start = Instant::now();
    let runs = (0..cfg.eval.seeds)
        .map(|i| run_latent_seed(cfg, cfg.seed + i as u64, cfg.latent.downstream))
        .collect::<Result<Vec<_>>>()?;
    let mut t = tables(cfg, &runs);
    let text = write_tables(store, "tables", &t)?;
    t.seconds = start.elapsed().as_secs_f64();
    store.record_timing("reproduce-tables", t.seconds)?;
    Ok((t, text))
}
