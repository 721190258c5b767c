//! Gaussian-kernel maximum mean discrepancy and the comparison tables built
//! on it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::Tensor;

use crate::error::{contract, io_error, CoreError, Result};

/// Rows used by the median heuristic at most.
pub const MEDIAN_SUBSAMPLE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_kernel(a: &Tensor, b: &Tensor, inv: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        let ra = a.row(i);
        let mut row = 0.0;
        for j in 0..b.rows() {
            row += (-sq_dist(ra, b.row(j)) * inv).exp();
        }
        total += row;
    }
    total / (a.rows() as f64 * b.rows() as f64)
}

fn lexicographic(a: &Tensor, b: &Tensor) -> Ordering {
    a.rows().cmp(&b.rows()).then_with(|| {
        a.data().iter().zip(b.data()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

/// Square root of the biased (V-statistic) MMD^2 with kernel
/// `exp(-|u - v|^2 / (2 h^2))`. Symmetric in its arguments bit for bit.
pub fn mmd(a: &Tensor, b: &Tensor, h: f64) -> Result<f64> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.cols() {
        return contract(format!(
            "mmd needs matrices with equal column counts, got {:?} and {:?}",
            a.shape(),
            b.shape()
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return contract(format!("bandwidth {h} must be positive"));
    }
    let (a, b) = if lexicographic(a, b) == Ordering::Greater { (b, a) } else { (a, b) };
    let inv = 1.0 / (2.0 * h * h);
    let v = mean_kernel(a, a, inv) + mean_kernel(b, b, inv) - 2.0 * mean_kernel(a, b, inv);
    Ok(v.max(0.0).sqrt())
}

/// Evenly spaced rows, at most `cap` of them.
fn subsample(m: &Tensor, cap: usize) -> Tensor {
    if m.rows() <= cap {
        return m.clone();
    }
    let idx: Vec<usize> = (0..cap).map(|i| i * m.rows() / cap).collect();
    m.select_rows(&idx)
}

/// Median pairwise Euclidean distance over (a deterministic subsample of)
/// `pooled`.
pub fn median_heuristic(pooled: &Tensor) -> Result<f64> {
    if pooled.shape().len() != 2 || pooled.rows() < 2 {
        return contract("median heuristic needs at least two rows");
    }
    let m = subsample(pooled, MEDIAN_SUBSAMPLE);
    let mut d = Vec::with_capacity(m.rows() * (m.rows() - 1) / 2);
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            d.push(sq_dist(m.row(i), m.row(j)).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    if !(med > 0.0) {
        return Err(CoreError::Degenerate("median pairwise distance is zero; bandwidth undefined".into()));
    }
    Ok(med)
}

pub fn stack_rows(parts: &[&Tensor]) -> Result<Tensor> {
    let cols = parts.first().map(|p| p.cols()).ok_or_else(|| CoreError::Contract("nothing to stack".into()))?;
    if parts.iter().any(|p| p.cols() != cols) {
        return contract("stacked matrices have different column counts");
    }
    let data: Vec<f64> = parts.iter().flat_map(|p| p.data().iter().copied()).collect();
    Ok(Tensor::matrix(data.len() / cols, cols, data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: f64::NAN, std: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std =
        if n > 1 { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Summary { mean, std, n }
}

/// One seed's labeled sample sets and the oracle they are compared with.
pub struct SeedSamples<'a> {
    pub seed: u64,
    pub oracle: &'a Tensor,
    /// `(row label, column label, samples)`.
    pub sets: Vec<(String, String, &'a Tensor)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: String,
    pub column: String,
    /// Seed to MMD.
    pub per_seed: BTreeMap<u64, f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    /// Seed to the pooled median-heuristic bandwidth used for that seed.
    pub bandwidths: BTreeMap<u64, f64>,
    pub cells: Vec<Cell>,
    /// Free-form context: configs, versions, notes.
    pub context: BTreeMap<String, serde_json::Value>,
}

/// MMD of every set against the oracle. For each seed one bandwidth is
/// taken from the pooled oracle and all sets of that seed.
pub fn compare_variants(seeds: &[SeedSamples<'_>]) -> Result<EvalReport> {
    let mut report = EvalReport::new("mmd");
    for s in seeds {
        if s.sets.iter().any(|(_, _, m)| m.cols() != s.oracle.cols()) {
            return contract("sample sets and oracle differ in dimension");
        }
        let mut parts: Vec<&Tensor> = vec![s.oracle];
        parts.extend(s.sets.iter().map(|(_, _, m)| *m));
        let h = median_heuristic(&stack_rows(&parts)?)?;
        report.bandwidths.insert(s.seed, h);
        for (row, col, m) in &s.sets {
            report.insert(row, col, s.seed, mmd(m, s.oracle, h)?);
        }
    }
    Ok(report)
}

impl EvalReport {
    pub fn new(metric: &str) -> Self {
        Self { metric: metric.into(), bandwidths: BTreeMap::new(), cells: Vec::new(), context: BTreeMap::new() }
    }

    /// Records `value` for `(row, column, seed)` and refreshes that cell's
    /// summary.
    pub fn insert(&mut self, row: &str, column: &str, seed: u64, value: f64) {
        let i = match self.cells.iter().position(|c| c.row == row && c.column == column) {
            Some(i) => i,
            None => {
                self.cells.push(Cell {
                    row: row.into(),
                    column: column.into(),
                    per_seed: BTreeMap::new(),
                    summary: summarize(&[value]),
                });
                self.cells.len() - 1
            }
        };
        let cell = &mut self.cells[i];
        cell.per_seed.insert(seed, value);
        cell.summary = summarize(&cell.per_seed.values().copied().collect::<Vec<_>>());
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    fn rows(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.row.as_str()) {
                out.push(&c.row);
            }
        }
        out
    }

    fn columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.column.as_str()) {
                out.push(&c.column);
            }
        }
        out
    }

    /// Aligned `mean ± std` table, rows by columns.
    pub fn to_text(&self) -> String {
        let cols = self.columns();
        let rows = self.rows();
        let mut grid: Vec<Vec<String>> =
            vec![std::iter::once(self.metric.clone()).chain(cols.iter().map(|c| c.to_string())).collect()];
        for r in &rows {
            let mut line = vec![r.to_string()];
            for c in &cols {
                line.push(match self.cell(r, c) {
                    Some(cell) => format!("{:.4} ± {:.4}", cell.summary.mean, cell.summary.std),
                    None => "-".into(),
                });
            }
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..=cols.len()).map(|j| grid.iter().map(|l| l[j].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in &grid {
            let cells: Vec<String> =
                line.iter().zip(&widths).map(|(s, w)| format!("{s}{}", " ".repeat(w - s.chars().count()))).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    /// `row,column,seed,value` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,column,seed,value\n");
        for c in &self.cells {
            for (seed, v) in &c.per_seed {
                let _ = writeln!(out, "{},{},{},{}", c.row, c.column, seed, v);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CoreError::Contract(e.to_string()))
    }

    /// Writes `<stem>.json`, `<stem>.txt` and `<stem>.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        for (ext, body) in [("json", self.to_json()?), ("txt", self.to_text()), ("csv", self.to_csv())] {
            let p = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&p, body).map_err(|e| io_error(&p, e))?;
        }
        Ok(())
    }
}
