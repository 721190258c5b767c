//! Dense row-major `f64` tensors and the kernels shared by the plain and the
//! recorded (tape) evaluation paths.
//!
//! Every forward computation in the workspace goes through the functions in
//! [`kernels`], whether or not a [`crate::Tape`] is recording. That is what
//! makes taped and untaped forward values bit-identical.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return contract(format!("shape {shape:?} must be a nonempty list of positive sizes"));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return contract(format!("shape {shape:?} holds {n} values but {} were given", data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![1], data: vec![v] }
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![v; n] }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(&other.shape)
    }

    /// Row vector `1 x n`.
    pub fn row_vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self { shape: vec![1, n], data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return contract("ragged rows");
        }
        Self::matrix(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Rows of a 2-D tensor (1 for a 1-D tensor).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 1 {
            1
        } else {
            self.shape[0]
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().expect("nonempty shape")
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor { shape: vec![idx.len(), c], data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        kernels::sum(&self.data)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

/// Raw kernels. Inputs are assumed shape-checked by the caller.
pub mod kernels {
    use super::Tensor;

    /// Pairwise-free left-to-right summation; the order is part of the
    /// reproducibility contract.
    pub fn sum(xs: &[f64]) -> f64 {
        xs.iter().fold(0.0, |acc, &v| acc + v)
    }

    pub fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor { shape: a.shape.clone(), data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
    }

    /// `a (m x k) * b (k x n)`.
    pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &a.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                let brow = &b.data[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        Tensor { shape: vec![m, n], data: out }
    }

    /// `a^T (k x m) * g (m x n)` for `a: m x k`.
    pub fn matmul_tn(a: &Tensor, g: &Tensor) -> Tensor {
        let (m, k, n) = (a.rows(), a.cols(), g.cols());
        let mut out = vec![0.0; k * n];
        for i in 0..m {
            let arow = &a.data[i * k..(i + 1) * k];
            let grow = &g.data[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                let orow = &mut out[p * n..(p + 1) * n];
                for (o, &gv) in orow.iter_mut().zip(grow) {
                    *o += av * gv;
                }
            }
        }
        Tensor { shape: vec![k, n], data: out }
    }

    /// `g (m x n) * b^T (n x k)` for `b: k x n`.
    pub fn matmul_nt(g: &Tensor, b: &Tensor) -> Tensor {
        let (m, n, k) = (g.rows(), g.cols(), b.rows());
        let mut out = vec![0.0; m * k];
        for i in 0..m {
            let grow = &g.data[i * n..(i + 1) * n];
            for p in 0..k {
                let brow = &b.data[p * n..(p + 1) * n];
                out[i * k + p] = grow.iter().zip(brow).fold(0.0, |acc, (&x, &y)| acc + x * y);
            }
        }
        Tensor { shape: vec![m, k], data: out }
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(a: &Tensor, row: &Tensor) -> Tensor {
        let n = a.cols();
        let mut data = a.data.clone();
        for chunk in data.chunks_mut(n) {
            for (v, &r) in chunk.iter_mut().zip(&row.data) {
                *v += r;
            }
        }
        Tensor { shape: a.shape.clone(), data }
    }

    /// Multiplies every row of `a` elementwise by a `1 x n` row.
    pub fn mul_row(a: &Tensor, row: &Tensor) -> Tensor {
        let n = a.cols();
        let mut data = a.data.clone();
        for chunk in data.chunks_mut(n) {
            for (v, &r) in chunk.iter_mut().zip(&row.data) {
                *v *= r;
            }
        }
        Tensor { shape: a.shape.clone(), data }
    }

    /// Column sums as a `1 x n` row.
    pub fn col_sums(a: &Tensor) -> Tensor {
        let n = a.cols();
        let mut out = vec![0.0; n];
        for chunk in a.data.chunks(n) {
            for (o, &v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        Tensor { shape: vec![1, n], data: out }
    }

    /// Row sums as an `m x 1` column.
    pub fn row_sums(a: &Tensor) -> Tensor {
        let n = a.cols();
        let data: Vec<f64> = a.data.chunks(n).map(sum).collect();
        Tensor { shape: vec![data.len(), 1], data }
    }

    pub fn select_cols(a: &Tensor, cols: &[usize]) -> Tensor {
        let n = a.cols();
        let mut data = Vec::with_capacity(a.rows() * cols.len());
        for chunk in a.data.chunks(n) {
            data.extend(cols.iter().map(|&c| chunk[c]));
        }
        Tensor { shape: vec![a.rows(), cols.len()], data }
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Tensor {
        let m = parts[0].rows();
        let total: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Tensor { shape: vec![m, total], data }
    }

    pub fn softplus(x: f64) -> f64 {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }

    pub fn sigmoid(x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_shape() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn matmul_variants_agree_with_explicit_transpose() {
        let a = Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = kernels::matmul(&a, &b);
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);
        let at = Tensor::matrix(3, 2, vec![1., 4., 2., 5., 3., 6.]).unwrap();
        let g = Tensor::matrix(2, 2, vec![1., 0., 0., 1.]).unwrap();
        assert_eq!(kernels::matmul_tn(&a, &g), kernels::matmul(&at, &g));
        let bt = Tensor::matrix(2, 3, vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(kernels::matmul_nt(&a, &bt), ab);
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(kernels::softplus(1000.0), 1000.0);
        assert!(kernels::softplus(-1000.0) >= 0.0);
        assert!((kernels::softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
