use serde::{Deserialize, Serialize};
use xgen_numerics::Tensor;

use crate::error::{contract, Result};

/// Per-column mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population statistics of the columns of `data`. Constant columns get
    /// unit scale so normalization stays finite.
    pub fn fit(data: &Tensor) -> Result<Self> {
        if data.shape().len() != 2 || data.rows() == 0 {
            return contract("normalization needs a nonempty matrix");
        }
        let n = data.rows() as f64;
        let mut mean = Vec::with_capacity(data.cols());
        let mut std = Vec::with_capacity(data.cols());
        for c in 0..data.cols() {
            let col = data.column(c);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, data: &Tensor) -> Tensor {
        self.apply(data, |v, m, s| (v - m) / s)
    }

    pub fn denormalize(&self, data: &Tensor) -> Tensor {
        self.apply(data, |v, m, s| v * s + m)
    }

    pub fn normalize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn apply(&self, data: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Tensor {
        assert_eq!(data.cols(), self.dim(), "normalization dimension mismatch");
        let mut out = data.clone();
        let d = self.dim();
        for row in out.data_mut().chunks_mut(d) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(*v, self.mean[j], self.std[j]);
            }
        }
        out
    }
}
