//! Seedable, splittable random streams.
//!
//! Streams are ChaCha20 keyed by a SHA-256 digest of the parent seed and a
//! label, so a named sub-stream never depends on how many values other
//! streams have drawn.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{contract, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

/// Deterministic 64-bit seed for `(seed, label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream named `label`; does not advance `self`.
    pub fn split(&self, label: &str) -> Rng {
        Rng::new(derive_seed(self.seed, label))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal_scalar(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64, n: usize) -> Result<Tensor> {
        if lo >= hi || n == 0 {
            return contract(format!("uniform({lo}, {hi}) with n = {n}"));
        }
        let data = (0..n).map(|_| self.uniform_scalar(lo, hi)).collect();
        Tensor::new(vec![n], data)
    }

    pub fn normal(&mut self, n: usize) -> Result<Tensor> {
        if n == 0 {
            return contract("normal with n = 0");
        }
        let data = (0..n).map(|_| self.normal_scalar()).collect();
        Tensor::new(vec![n], data)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Tensor {
        let data = (0..rows * cols).map(|_| self.normal_scalar()).collect();
        Tensor::matrix(rows, cols, data).expect("positive dims")
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let a = Rng::new(0).uniform(0.0, 1.0, 100).unwrap();
        let b = Rng::new(0).uniform(0.0, 1.0, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_mean() {
        let t = Rng::new(7).uniform(0.0, 1.0, 100_000).unwrap();
        assert!((t.mean() - 0.5).abs() < 0.01);
        assert!(t.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn normal_variance() {
        let t = Rng::new(11).normal(100_000).unwrap();
        let m = t.mean();
        let var = t.data().iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (t.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "var = {var}");
    }

    #[test]
    fn bad_range_is_rejected() {
        assert!(Rng::new(0).uniform(1.0, 1.0, 3).is_err());
        assert!(Rng::new(0).uniform(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn split_streams_are_independent_of_parent_draws() {
        let mut parent = Rng::new(3);
        let before = parent.split("prior").next_u64();
        parent.next_u64();
        let after = parent.split("prior").next_u64();
        assert_eq!(before, after);
        assert_ne!(parent.split("prior").next_u64(), parent.split("likelihood").next_u64());
    }
}
