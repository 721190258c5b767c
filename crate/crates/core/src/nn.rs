//! Fully connected tanh networks with a linear output layer.
//!
//! [`Mlp::forward`] and [`Mlp::forward_taped`] call the same kernels in the
//! same order, so recorded and plain forward values agree bit for bit.

use serde::{Deserialize, Serialize};
use xgen_numerics::{kernels, Rng, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `in x out` per layer.
    pub weights: Vec<Tensor>,
    /// `1 x out` per layer.
    pub biases: Vec<Tensor>,
}

impl Mlp {
    /// Layer sizes `[input, hidden..., output]`. Weights are drawn from
    /// `N(0, 1/fan_in)`, biases start at zero.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = (1.0 / fan_in as f64).sqrt();
            let w = rng.normal_matrix(fan_in, fan_out).map(|v| v * scale);
            weights.push(w);
            biases.push(Tensor::zeros(&[1, fan_out]));
        }
        Self { weights, biases }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].cols()
    }

    /// Number of parameter tensors, `2 * layers`.
    pub fn n_tensors(&self) -> usize {
        2 * self.weights.len()
    }

    /// Parameters interleaved as `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w, b]).collect()
    }

    /// Overwrites the parameters from tensors in [`Mlp::params`] order.
    pub fn load(&mut self, params: &[Tensor]) {
        assert_eq!(params.len(), self.n_tensors());
        for (dst, src) in self.params_mut().into_iter().zip(params) {
            assert_eq!(dst.shape(), src.shape());
            *dst = src.clone();
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = kernels::add_row(&kernels::matmul(&h, w), b);
            if l < last {
                h = h.map(f64::tanh);
            }
        }
        h
    }

    /// Recorded forward pass with parameters supplied as tape variables in
    /// [`Mlp::params`] order.
    pub fn forward_taped<'t>(params: &[Var<'t>], x: Var<'t>) -> Var<'t> {
        assert!(params.len() >= 2 && params.len().is_multiple_of(2));
        let layers = params.len() / 2;
        let mut h = x;
        for l in 0..layers {
            h = h.matmul(params[2 * l]).add_row(params[2 * l + 1]);
            if l + 1 < layers {
                h = h.tanh();
            }
        }
        h
    }

    /// Places the parameters on `tape` as constants (no gradient needed).
    pub fn constants<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params().into_iter().map(|p| tape.constant(p.clone())).collect()
    }
}

/// Hands out consecutive parameter variables.
pub struct Cursor<'a, 't> {
    vars: &'a [Var<'t>],
    pos: usize,
}

impl<'a, 't> Cursor<'a, 't> {
    pub fn new(vars: &'a [Var<'t>]) -> Self {
        Self { vars, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> &'a [Var<'t>] {
        let out = &self.vars[self.pos..self.pos + n];
        self.pos += n;
        out
    }

    pub fn next(&mut self) -> Var<'t> {
        self.take(1)[0]
    }

    pub fn finished(&self) -> bool {
        self.pos == self.vars.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use xgen_numerics::check::max_gradient_error;

    #[test]
    fn taped_forward_is_bit_identical() {
        let mut rng = Rng::new(3);
        let net = Mlp::new(&[3, 64, 64, 2], &mut rng);
        let x = rng.normal_matrix(17, 3);
        let plain = net.forward(&x);
        let tape = Tape::new();
        let vars = net.constants(&tape);
        let taped = Mlp::forward_taped(&vars, tape.constant(x)).value();
        assert_eq!(plain, taped);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(4);
        let net = Mlp::new(&[3, 8, 8, 1], &mut rng);
        let x = rng.normal_matrix(5, 3);
        let params: Vec<Tensor> = net.params().into_iter().cloned().collect();
        let err = max_gradient_error(&params, |tape, vars| {
            Mlp::forward_taped(vars, tape.constant(x.clone())).square().mean()
        })
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }
}
