//! `exact-demo`: identification formulas against brute-force enumeration on
//! builtin topologies or a user-supplied net file.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use xgen_exact::builtins::{builtin, fig3a, fig3b, fig3b_disjoint_support, fig3b_with_leakage, SelectionKind};
use xgen_exact::{
    check_structure, conservative_identify, construct_positive_point, identify_no_shared, nonidentifiability_witness,
    oracle_novel_conditional, DiscreteBayesNet, Role, SpecificationPartition, StructureReport, VarId,
};
use xgen_numerics::{derive_seed, Rng};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::store::Store;

#[derive(Debug, Clone, Serialize)]
pub struct ProductCheck {
    pub nets: usize,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub nets: usize,
    pub positive: usize,
    pub min_probability: f64,
    /// Nets whose shared feature has no common support; each should error.
    pub disjoint_nets: usize,
    pub disjoint_rejected: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub mean_tv: f64,
    pub max_tv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeakageSweep {
    pub nets: usize,
    pub rows: Vec<SweepRow>,
    /// Nets whose TV decreases strictly along the sweep.
    pub monotone_nets: usize,
    /// Max TV with no selection at all.
    pub zero_leakage_max_tv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessCheck {
    pub selected_gap: Option<f64>,
    pub tv: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub net: String,
    pub structure: StructureReport,
    /// Feature names shared between specifications.
    pub shared: Vec<String>,
    pub product_formula: Option<ProductCheck>,
    pub positive_point: Option<PointCheck>,
    /// TV between the conservative solution and the enumerated conditional
    /// of a single net file.
    pub conservative_tv: Option<f64>,
    pub leakage_sweep: Option<LeakageSweep>,
    pub witness: Option<WitnessCheck>,
}

fn shared_features(net: &DiscreteBayesNet) -> Vec<VarId> {
    net.features()
        .into_iter()
        .filter(|&x| net.children(x).iter().filter(|&&c| net.variables()[c].role == Role::Specification).count() > 1)
        .collect()
}

fn product_error(net: &DiscreteBayesNet) -> Result<f64> {
    let part = SpecificationPartition::singletons(net, vec![])?;
    Ok(identify_no_shared(net, &part)?.max_abs_diff(&oracle_novel_conditional(net)?)?)
}

fn conservative_tv(net: &DiscreteBayesNet) -> Result<f64> {
    let part = SpecificationPartition::singletons(net, shared_features(net))?;
    Ok(conservative_identify(net, &part)?.tv_distance(&oracle_novel_conditional(net)?)?)
}

fn witness(net: &DiscreteBayesNet) -> WitnessCheck {
    match nonidentifiability_witness(net) {
        Ok(w) => WitnessCheck { selected_gap: Some(w.selected_gap), tv: Some(w.tv), error: None },
        Err(e) => WitnessCheck { selected_gap: None, tv: None, error: Some(e.to_string()) },
    }
}

fn draw_rng(seed: u64, label: &str, i: usize) -> Rng {
    Rng::new(derive_seed(seed, &format!("exact/{label}/{i}")))
}

pub fn product_check(seed: u64, nets: usize) -> Result<ProductCheck> {
    let mut max_abs_error: f64 = 0.0;
    for i in 0..nets {
        let net = fig3a(&mut draw_rng(seed, "fig3a", i), SelectionKind::ExcludeNovel);
        max_abs_error = max_abs_error.max(product_error(&net)?);
    }
    Ok(ProductCheck { nets, max_abs_error })
}

pub fn point_check(seed: u64, nets: usize) -> Result<PointCheck> {
    let mut check =
        PointCheck { nets, positive: 0, min_probability: f64::INFINITY, disjoint_nets: nets, disjoint_rejected: 0 };
    for i in 0..nets {
        let net = fig3b(&mut draw_rng(seed, "fig3b/overlap", i), SelectionKind::ExcludeNovel);
        let part = SpecificationPartition::singletons(&net, shared_features(&net))?;
        if let Ok(p) = construct_positive_point(&net, &part) {
            check.min_probability = check.min_probability.min(p.probability);
            if p.probability > 0.0 {
                check.positive += 1;
            }
        }
        let bad = fig3b_disjoint_support(&mut draw_rng(seed, "fig3b/disjoint", i));
        let part = SpecificationPartition::singletons(&bad, shared_features(&bad))?;
        if construct_positive_point(&bad, &part).is_err() {
            check.disjoint_rejected += 1;
        }
    }
    Ok(check)
}

pub fn leakage_sweep(seed: u64, nets: usize, deltas: &[f64]) -> Result<LeakageSweep> {
    let mut tv = vec![vec![0.0; deltas.len()]; nets];
    let mut zero_leakage_max_tv: f64 = 0.0;
    for (i, row) in tv.iter_mut().enumerate() {
        for (j, &delta) in deltas.iter().enumerate() {
            // Same CPT draw at every leakage level.
            let net = fig3b_with_leakage(&mut draw_rng(seed, "fig3b/leakage", i), delta)?;
            row[j] = conservative_tv(&net)?;
        }
        let exact = fig3b_with_leakage(&mut draw_rng(seed, "fig3b/leakage", i), 0.0)?;
        zero_leakage_max_tv = zero_leakage_max_tv.max(conservative_tv(&exact)?);
    }
    let rows = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| SweepRow {
            delta,
            mean_tv: tv.iter().map(|r| r[j]).sum::<f64>() / nets.max(1) as f64,
            max_tv: tv.iter().map(|r| r[j]).fold(0.0, f64::max),
        })
        .collect();
    let monotone_nets = tv.iter().filter(|r| r.windows(2).all(|w| w[1] < w[0])).count();
    Ok(LeakageSweep { nets, rows, monotone_nets, zero_leakage_max_tv })
}

fn empty_report(name: &str, net: &DiscreteBayesNet) -> ExactReport {
    ExactReport {
        net: name.into(),
        structure: check_structure(net),
        shared: shared_features(net).iter().map(|&x| net.name(x).to_string()).collect(),
        product_formula: None,
        positive_point: None,
        conservative_tv: None,
        leakage_sweep: None,
        witness: None,
    }
}

/// `target` is `fig3a`, `fig3b`, or a path to a net file.
pub fn run_one(cfg: &RunConfig, target: &str) -> Result<ExactReport> {
    let seed = cfg.seed;
    let n = cfg.exact.nets;
    match target {
        "fig3a" => {
            let net = builtin("fig3a", &mut draw_rng(seed, "fig3a", 0))?;
            Ok(ExactReport { product_formula: Some(product_check(seed, n)?), ..empty_report(target, &net) })
        }
        "fig3b" => {
            let net = builtin("fig3b", &mut draw_rng(seed, "fig3b/witness", 0))?;
            Ok(ExactReport {
                positive_point: Some(point_check(seed, n)?),
                leakage_sweep: Some(leakage_sweep(seed, n, &cfg.exact.leakage)?),
                witness: Some(witness(&net)),
                ..empty_report(target, &net)
            })
        }
        path => {
            let net = DiscreteBayesNet::load(Path::new(path))?;
            let mut report = empty_report(path, &net);
            if !report.structure.passes() {
                return Err(HarnessError::Structure(
                    serde_json::to_string(&report.structure).expect("report serializes"),
                ));
            }
            if report.shared.is_empty() {
                report.product_formula = Some(ProductCheck { nets: 1, max_abs_error: product_error(&net)? });
            } else {
                let part = SpecificationPartition::singletons(&net, shared_features(&net))?;
                let p = construct_positive_point(&net, &part);
                report.positive_point = Some(PointCheck {
                    nets: 1,
                    positive: p.as_ref().map_or(0, |p| usize::from(p.probability > 0.0)),
                    min_probability: p.as_ref().map_or(0.0, |p| p.probability),
                    disjoint_nets: 0,
                    disjoint_rejected: 0,
                });
                report.conservative_tv = Some(conservative_tv(&net)?);
                report.witness = Some(witness(&net));
            }
            Ok(report)
        }
    }
}

pub fn to_text(r: &ExactReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "net {}: structure {}", r.net, if r.structure.passes() { "ok" } else { "violated" });
    if !r.shared.is_empty() {
        let _ = writeln!(s, "  shared features: {}", r.shared.join(", "));
    }
    if let Some(p) = &r.product_formula {
        let _ = writeln!(s, "  product formula over {} nets: max |formula - oracle| = {:.3e}", p.nets, p.max_abs_error);
    }
    if let Some(p) = &r.positive_point {
        let _ = writeln!(
            s,
            "  positive point: {}/{} positive (min probability {:.4}); disjoint support rejected {}/{}",
            p.positive, p.nets, p.min_probability, p.disjoint_rejected, p.disjoint_nets
        );
    }
    if let Some(tv) = r.conservative_tv {
        let _ = writeln!(s, "  conservative solution: TV to oracle {tv:.3e}");
    }
    if let Some(sw) = &r.leakage_sweep {
        let _ = writeln!(s, "  leakage sweep over {} nets ({} strictly decreasing):", sw.nets, sw.monotone_nets);
        let _ = writeln!(s, "    {:>8}  {:>10}  {:>10}", "delta", "mean TV", "max TV");
        for row in &sw.rows {
            let _ = writeln!(s, "    {:>8}  {:>10.3e}  {:>10.3e}", row.delta, row.mean_tv, row.max_tv);
        }
        let _ = writeln!(s, "    {:>8}  {:>10}  {:>10.3e}", 0, "", sw.zero_leakage_max_tv);
    }
    if let Some(w) = &r.witness {
        match (&w.error, w.selected_gap, w.tv) {
            (None, Some(gap), Some(tv)) => {
                let _ = writeln!(s, "  witness: selected-data gap {gap:.3e}, novel TV {tv:.4}");
            }
            (err, _, _) => {
                let _ = writeln!(s, "  witness: none ({})", err.as_deref().unwrap_or("unknown"));
            }
        }
    }
    s
}

fn stem(target: &str) -> String {
    let base = Path::new(target).file_stem().and_then(|s| s.to_str()).unwrap_or("net");
    base.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

/// Runs every target (both builtins when none is given) and writes
/// `reports/exact_<name>.{json,txt}`.
pub fn exact_demo(cfg: &RunConfig, store: &Store, targets: &[String]) -> Result<(Vec<ExactReport>, String)> {
    let t = std::time::Instant::now();
    let targets: Vec<String> = if targets.is_empty() { vec!["fig3a".into(), "fig3b".into()] } else { targets.to_vec() };
    let mut reports = Vec::new();
    let mut text = String::new();
    for target in &targets {
        let r = run_one(cfg, target)?;
        let body = to_text(&r);
        let name = stem(target);
        let json = serde_json::to_string_pretty(&r).expect("report serializes");
        store.write_bytes(&format!("reports/exact_{name}.json"), format!("{json}\n").as_bytes())?;
        store.write_bytes(&format!("reports/exact_{name}.txt"), body.as_bytes())?;
        text.push_str(&body);
        reports.push(r);
    }
    store.record_timing("exact-demo", t.elapsed().as_secs_f64())?;
    Ok((reports, text))
}
