//! The three-feature, two-specification synthetic task and its selection
//! split.
//!
//! `Z1 = a11 X1 + a12 X2 + e1`, `Z2 = a23 X3 + a22 X2 + e2`, with X2 the
//! shared parent. Rows with `Z1 < t1` and `Z2 > t2` form the novel (oracle)
//! region and never enter the seen split.

use std::path::Path;

use serde::{Deserialize, Serialize};
use xgen_numerics::{Rng, Tensor};

use crate::error::{contract, io_error, CoreError, Result};

const NOVEL_ATTEMPTS_PER_ROW: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_samples: usize,
    pub coeff_z1: (f64, f64),
    pub coeff_z2: (f64, f64),
    pub x2_range: (f64, f64),
    pub noise_range: (f64, f64),
    /// Upper bound on Z1 inside the novel region.
    pub t1: f64,
    /// Lower bound on Z2 inside the novel region.
    pub t2: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            coeff_z1: (0.8, 0.6),
            coeff_z2: (0.6, 0.8),
            x2_range: (0.75, 0.8),
            noise_range: (0.0, 0.2),
            t1: 0.8,
            t2: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.coeff_z1.0,
            self.coeff_z1.1,
            self.coeff_z2.0,
            self.coeff_z2.1,
            self.x2_range.0,
            self.x2_range.1,
            self.noise_range.0,
            self.noise_range.1,
            self.t1,
            self.t2,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return contract("generator config has non-finite entries");
        }
        if self.n_samples == 0 {
            return contract("n_samples must be positive");
        }
        if self.x2_range.0 >= self.x2_range.1 {
            return contract(format!("x2_range {:?} is empty", self.x2_range));
        }
        if self.noise_range.0 > self.noise_range.1 {
            return contract(format!("noise_range {:?} is reversed", self.noise_range));
        }
        Ok(())
    }

    /// Specification values for features `x` and noise `(e1, e2)`.
    pub fn specs(&self, x: [f64; 3], noise: [f64; 2]) -> [f64; 2] {
        let (a11, a12) = self.coeff_z1;
        let (a23, a22) = self.coeff_z2;
        [a11 * x[0] + a12 * x[1] + noise[0], a23 * x[2] + a22 * x[1] + noise[1]]
    }

    /// Generator map with both noise terms at their mean.
    pub fn mean_map(&self, x: [f64; 3]) -> [f64; 2] {
        let e = 0.5 * (self.noise_range.0 + self.noise_range.1);
        self.specs(x, [e, e])
    }

    /// One row `(x, z)` from the generator.
    pub fn draw_row(&self, rng: &mut Rng) -> ([f64; 3], [f64; 2]) {
        let x = [
            rng.uniform_scalar(0.0, 1.0),
            rng.uniform_scalar(self.x2_range.0, self.x2_range.1),
            rng.uniform_scalar(0.0, 1.0),
        ];
        let e = [
            rng.uniform_scalar(self.noise_range.0, self.noise_range.1),
            rng.uniform_scalar(self.noise_range.0, self.noise_range.1),
        ];
        (x, self.specs(x, e))
    }

    /// `n` specification rows from the generator restricted to the novel
    /// region, by rejection.
    pub fn draw_novel_specs(&self, n: usize, rng: &mut Rng) -> Result<Tensor> {
        self.validate()?;
        let limit = n.saturating_mul(NOVEL_ATTEMPTS_PER_ROW).max(NOVEL_ATTEMPTS_PER_ROW);
        let mut data = Vec::with_capacity(2 * n);
        let mut tries = 0usize;
        while data.len() < 2 * n {
            if tries == limit {
                return Err(CoreError::Degenerate(format!("novel region rejected {limit} generator draws")));
            }
            tries += 1;
            let (_, z) = self.draw_row(rng);
            if self.is_novel(z) {
                data.extend(z);
            }
        }
        Ok(Tensor::matrix(n, 2, data)?)
    }

    /// Strict novel-region predicate; boundary rows are not novel.
    pub fn is_novel(&self, z: [f64; 2]) -> bool {
        z[0] < self.t1 && z[1] > self.t2
    }

    /// Fraction of feature rows whose noise-free specifications
    /// ([`Self::mean_map`]) fall in the novel region.
    pub fn novel_fraction(&self, x: &Tensor) -> Result<f64> {
        if x.cols() != 3 || x.rows() == 0 {
            return contract(format!("expected a nonempty n x 3 feature matrix, got {:?}", x.shape()));
        }
        let hits = (0..x.rows()).filter(|&r| {
            let row = x.row(r);
            self.is_novel(self.mean_map([row[0], row[1], row[2]]))
        });
        Ok(hits.count() as f64 / x.rows() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// `n x 3`.
    pub x: Tensor,
    /// `n x 2`.
    pub z: Tensor,
    pub s: Vec<bool>,
}

impl LabeledDataset {
    pub fn new(x: Tensor, z: Tensor, s: Vec<bool>) -> Result<Self> {
        if x.rows() != z.rows() || x.rows() != s.len() {
            return contract("x, z and s row counts differ");
        }
        if !x.is_finite() || !z.is_finite() {
            return contract("dataset has non-finite entries");
        }
        Ok(Self { x, z, s })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn x_row(&self, i: usize) -> [f64; 3] {
        let r = self.x.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn z_row(&self, i: usize) -> [f64; 2] {
        let r = self.z.row(i);
        [r[0], r[1]]
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::Degenerate("empty row selection".into()));
        }
        Ok(Self {
            x: self.x.select_rows(rows),
            z: self.z.select_rows(rows),
            s: rows.iter().map(|&i| self.s[i]).collect(),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
        w.write_record(["x1", "x2", "x3", "z1", "z2", "s"]).map_err(|e| io_error(path, e))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().chain(self.z.row(i)).map(|v| v.to_string()).collect();
            rec.push(if self.s[i] { "1" } else { "0" }.to_string());
            w.write_record(&rec).map_err(|e| io_error(path, e))?;
        }
        w.flush().map_err(|e| io_error(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
        let header = r.headers().map_err(|e| io_error(path, e))?.clone();
        if header.iter().collect::<Vec<_>>() != ["x1", "x2", "x3", "z1", "z2", "s"] {
            return Err(io_error(path, format!("unexpected header {header:?}")));
        }
        let (mut x, mut z, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(|e| io_error(path, e))?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| io_error(path, format!("row {:?}: {e}", rec.position())))
            };
            x.extend([num(0)?, num(1)?, num(2)?]);
            z.extend([num(3)?, num(4)?]);
            s.push(match &rec[5] {
                "1" => true,
                "0" => false,
                other => return Err(io_error(path, format!("selection flag `{other}`"))),
            });
        }
        if s.is_empty() {
            return Err(io_error(path, "no rows"));
        }
        let n = s.len();
        Self::new(Tensor::matrix(n, 3, x)?, Tensor::matrix(n, 2, z)?, s)
    }
}

/// Draws `n_samples` rows. `s` marks rows outside the novel region.
pub fn generate(config: &GeneratorConfig, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let n = config.n_samples;
    let (mut xs, mut zs, mut s) = (Vec::with_capacity(3 * n), Vec::with_capacity(2 * n), Vec::with_capacity(n));
    for _ in 0..n {
        let (x, z) = config.draw_row(&mut rng);
        xs.extend(x);
        zs.extend(z);
        s.push(!config.is_novel(z));
    }
    LabeledDataset::new(Tensor::matrix(n, 3, xs)?, Tensor::matrix(n, 2, zs)?, s)
}

#[derive(Debug, Clone)]
pub struct Split {
    pub seen: LabeledDataset,
    pub oracle: LabeledDataset,
}

/// Partitions rows by the novel-region predicate. Fails when either side
/// would be empty.
pub fn split_by_selection(ds: &LabeledDataset, config: &GeneratorConfig) -> Result<Split> {
    let (mut seen, mut oracle) = (Vec::new(), Vec::new());
    for i in 0..ds.len() {
        if config.is_novel(ds.z_row(i)) {
            oracle.push(i);
        } else {
            seen.push(i);
        }
    }
    if seen.is_empty() || oracle.is_empty() {
        return Err(CoreError::Degenerate(format!(
            "degenerate split: {} seen rows, {} oracle rows",
            seen.len(),
            oracle.len()
        )));
    }
    let mut seen = ds.select(&seen)?;
    let mut oracle = ds.select(&oracle)?;
    seen.s.iter_mut().for_each(|v| *v = true);
    oracle.s.iter_mut().for_each(|v| *v = false);
    Ok(Split { seen, oracle })
}
