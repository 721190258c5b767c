//! Central finite-difference gradients, used as the oracle for the tape.

use crate::error::Result;
use crate::tape::{value_and_grad, Tape, Var};
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;

/// Magnitude below which gradients are compared absolutely. Central
/// differences in f64 carry roughly `1e-16 * |f| / h` rounding noise, so
/// comparing near-zero entries relatively would only measure that noise.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn eval<F>(params: &[Tensor], f: &F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    f(&tape, &vars).value().item()
}

/// Central-difference gradient of a scalar function of `params`.
pub fn finite_difference<F>(params: &[Tensor], f: F, h: f64) -> Vec<Tensor>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Tensor::zeros_like(&params[p]);
        for i in 0..params[p].len() {
            let orig = work[p].data()[i];
            work[p].data_mut()[i] = orig + h;
            let up = eval(&work, &f);
            work[p].data_mut()[i] = orig - h;
            let down = eval(&work, &f);
            work[p].data_mut()[i] = orig;
            g.data_mut()[i] = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Largest relative error between tape and finite-difference gradients.
pub fn max_gradient_error<F>(params: &[Tensor], f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let (_, analytic) = value_and_grad(params, &f)?;
    let numeric = finite_difference(params, &f, FD_STEP);
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(&numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            worst = worst.max(relative_error(x, y));
        }
    }
    Ok(worst)
}
