//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every primitive applied to its [`Var`] handles. Nodes
//! only reference earlier nodes, so the recording is already in topological
//! order and the backward pass is a single reverse sweep.
//!
//! Broadcasting is limited to scalar-tensor operations plus two explicit
//! row-broadcast primitives ([`Var::add_row`], [`Var::mul_row`]) used for
//! biases and input masks.

use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{contract, NumericsError, Result};
use crate::tensor::{kernels, Tensor};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize, f64),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Softplus(usize),
    Sigmoid(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    RowSum(usize),
    SelectCols(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::MatMul(..) => "matmul",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Neg(_) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Tanh(_) => "tanh",
            Op::Softplus(_) => "softplus",
            Op::Sigmoid(_) => "sigmoid",
            Op::Square(_) => "square",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::RowSum(_) => "row_sum",
            Op::SelectCols(..) => "select_cols",
            Op::ConcatCols(_) => "concat_cols",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of a computation. Single-writer; not `Sync`.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    failure: Cell<Option<&'static str>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("idx", &self.idx).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an input. Gradients are available for every leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// Records a constant. Identical to a leaf; the distinction is only in
    /// how callers use the returned gradients.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Name of the first primitive that produced a non-finite value, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        self.failure.get()
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        if self.failure.get().is_none() && !value.is_finite() {
            self.failure.set(Some(op.name()));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var { tape: self, idx: nodes.len() - 1 }
    }

    fn value_of(&self, idx: usize) -> Tensor {
        self.nodes.borrow()[idx].value.clone()
    }

    fn unary(&self, a: usize, op: Op, f: impl Fn(&Tensor) -> Tensor) -> Var<'_> {
        let out = f(&self.nodes.borrow()[a].value);
        self.push(out, op)
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(&Tensor, &Tensor) -> Tensor) -> Var<'_> {
        let out = {
            let nodes = self.nodes.borrow();
            f(&nodes[a].value, &nodes[b].value)
        };
        self.push(out, op)
    }

    /// Re-evaluates every recorded node from the leaves. Used to check that
    /// the recording reproduces its forward values exactly.
    pub fn replay(&self) -> Vec<Tensor> {
        let nodes = self.nodes.borrow();
        let mut vals: Vec<Tensor> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = match &node.op {
                Op::Leaf => node.value.clone(),
                op => forward(op, &vals),
            };
            vals.push(v);
        }
        vals
    }

    pub fn recorded_values(&self) -> Vec<Tensor> {
        self.nodes.borrow().iter().map(|n| n.value.clone()).collect()
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if let Some(primitive) = self.failure.get() {
            return Err(NumericsError::NumericFailure { primitive });
        }
        let nodes = self.nodes.borrow();
        if !nodes[loss.idx].value.is_scalar() {
            return contract(format!("loss must be scalar, got shape {:?}", nodes[loss.idx].value.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.idx + 1];
        grads[loss.idx] = Some(Tensor::full(nodes[loss.idx].value.shape(), 1.0));

        for i in (0..=loss.idx).rev() {
            let node = &nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let val = |j: usize| &nodes[j].value;
            let mut acc = |j: usize, d: Tensor| accumulate(&mut grads[j], d);
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    acc(*a, kernels::zip(&g, val(*b), |x, y| x * y));
                    acc(*b, kernels::zip(&g, val(*a), |x, y| x * y));
                }
                Op::Div(a, b) => {
                    acc(*a, kernels::zip(&g, val(*b), |x, y| x / y));
                    let t = kernels::zip(&g, val(*a), |x, y| x * y);
                    acc(*b, kernels::zip(&t, val(*b), |x, y| -x / (y * y)));
                }
                Op::MatMul(a, b) => {
                    acc(*a, kernels::matmul_nt(&g, val(*b)));
                    acc(*b, kernels::matmul_tn(val(*a), &g));
                }
                Op::AddRow(a, r) => {
                    acc(*r, kernels::col_sums(&g));
                    acc(*a, g.clone());
                }
                Op::MulRow(a, r) => {
                    acc(*r, kernels::col_sums(&kernels::zip(&g, val(*a), |x, y| x * y)));
                    acc(*a, kernels::mul_row(&g, val(*r)));
                }
                Op::Neg(a) => acc(*a, g.map(|v| -v)),
                Op::Scale(a, c) => {
                    let c = *c;
                    acc(*a, g.map(|v| v * c));
                }
                Op::AddScalar(a, _) => acc(*a, g.clone()),
                Op::Exp(a) => acc(*a, kernels::zip(&g, &node.value, |x, y| x * y)),
                Op::Log(a) => acc(*a, kernels::zip(&g, val(*a), |x, y| x / y)),
                Op::Tanh(a) => acc(*a, kernels::zip(&g, &node.value, |x, y| x * (1.0 - y * y))),
                Op::Softplus(a) => acc(*a, kernels::zip(&g, val(*a), |x, y| x * kernels::sigmoid(y))),
                Op::Sigmoid(a) => acc(*a, kernels::zip(&g, &node.value, |x, y| x * y * (1.0 - y))),
                Op::Square(a) => acc(*a, kernels::zip(&g, val(*a), |x, y| 2.0 * x * y)),
                Op::Sum(a) => acc(*a, Tensor::full(val(*a).shape(), g.item())),
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    acc(*a, Tensor::full(val(*a).shape(), g.item() / n));
                }
                Op::RowSum(a) => {
                    let src = val(*a);
                    let n = src.cols();
                    let mut d = Tensor::zeros(src.shape());
                    for (r, chunk) in d.data_mut().chunks_mut(n).enumerate() {
                        chunk.fill(g.data()[r]);
                    }
                    acc(*a, d);
                }
                Op::SelectCols(a, cols) => {
                    let src = val(*a);
                    let mut d = Tensor::zeros(src.shape());
                    for r in 0..src.rows() {
                        for (k, &c) in cols.iter().enumerate() {
                            let v = d.get(r, c) + g.get(r, k);
                            d.set(r, c, v);
                        }
                    }
                    acc(*a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let idx: Vec<usize> = (offset..offset + w).collect();
                        acc(p, kernels::select_cols(&g, &idx));
                        offset += w;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn forward(op: &Op, vals: &[Tensor]) -> Tensor {
    match op {
        Op::Leaf => unreachable!("leaves are not recomputed"),
        Op::Add(a, b) => kernels::zip(&vals[*a], &vals[*b], |x, y| x + y),
        Op::Sub(a, b) => kernels::zip(&vals[*a], &vals[*b], |x, y| x - y),
        Op::Mul(a, b) => kernels::zip(&vals[*a], &vals[*b], |x, y| x * y),
        Op::Div(a, b) => kernels::zip(&vals[*a], &vals[*b], |x, y| x / y),
        Op::MatMul(a, b) => kernels::matmul(&vals[*a], &vals[*b]),
        Op::AddRow(a, r) => kernels::add_row(&vals[*a], &vals[*r]),
        Op::MulRow(a, r) => kernels::mul_row(&vals[*a], &vals[*r]),
        Op::Neg(a) => vals[*a].map(|v| -v),
        Op::Scale(a, c) => {
            let c = *c;
            vals[*a].map(|v| v * c)
        }
        Op::AddScalar(a, c) => {
            let c = *c;
            vals[*a].map(|v| v + c)
        }
        Op::Exp(a) => vals[*a].map(f64::exp),
        Op::Log(a) => vals[*a].map(f64::ln),
        Op::Tanh(a) => vals[*a].map(f64::tanh),
        Op::Softplus(a) => vals[*a].map(kernels::softplus),
        Op::Sigmoid(a) => vals[*a].map(kernels::sigmoid),
        Op::Square(a) => vals[*a].map(|v| v * v),
        Op::Sum(a) => Tensor::scalar(vals[*a].sum()),
        Op::Mean(a) => Tensor::scalar(vals[*a].mean()),
        Op::RowSum(a) => kernels::row_sums(&vals[*a]),
        Op::SelectCols(a, cols) => kernels::select_cols(&vals[*a], cols),
        Op::ConcatCols(parts) => {
            let refs: Vec<&Tensor> = parts.iter().map(|&p| &vals[p]).collect();
            kernels::concat_cols(&refs)
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, d: Tensor) {
    match slot {
        Some(t) => {
            for (x, y) in t.data_mut().iter_mut().zip(d.data()) {
                *x += y;
            }
        }
        None => *slot = Some(d),
    }
}

/// Result of a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` does not influence the loss.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        match self.grads.get(v.idx).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros_like(&v.value()),
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.idx)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.idx].value.shape().to_vec()
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    fn check_same_shape(&self, other: &Var<'t>, op: &str) {
        self.same_tape(other);
        let (a, b) = (self.shape(), other.shape());
        assert_eq!(a, b, "{op}: shape mismatch {a:?} vs {b:?}");
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        self.same_tape(&other);
        let (a, b) = (self.shape(), other.shape());
        assert!(a.len() == 2 && b.len() == 2 && a[1] == b[0], "matmul: {a:?} x {b:?}");
        self.tape.binary(self.idx, other.idx, Op::MatMul(self.idx, other.idx), kernels::matmul)
    }

    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        self.same_tape(&row);
        assert_eq!(row.shape(), vec![1, self.shape()[1]], "add_row: bad row shape");
        self.tape.binary(self.idx, row.idx, Op::AddRow(self.idx, row.idx), kernels::add_row)
    }

    pub fn mul_row(self, row: Var<'t>) -> Var<'t> {
        self.same_tape(&row);
        assert_eq!(row.shape(), vec![1, self.shape()[1]], "mul_row: bad row shape");
        self.tape.binary(self.idx, row.idx, Op::MulRow(self.idx, row.idx), kernels::mul_row)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape.unary(self.idx, Op::Scale(self.idx, c), |t| t.map(|v| v * c))
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        self.tape.unary(self.idx, Op::AddScalar(self.idx, c), |t| t.map(|v| v + c))
    }

    pub fn exp(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Exp(self.idx), |t| t.map(f64::exp))
    }

    pub fn ln(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Log(self.idx), |t| t.map(f64::ln))
    }

    pub fn tanh(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Tanh(self.idx), |t| t.map(f64::tanh))
    }

    pub fn softplus(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Softplus(self.idx), |t| t.map(kernels::softplus))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Sigmoid(self.idx), |t| t.map(kernels::sigmoid))
    }

    pub fn square(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Square(self.idx), |t| t.map(|v| v * v))
    }

    pub fn sum(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Sum(self.idx), |t| Tensor::scalar(t.sum()))
    }

    pub fn mean(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Mean(self.idx), |t| Tensor::scalar(t.mean()))
    }

    /// Per-row sums, `m x n -> m x 1`.
    pub fn row_sum(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::RowSum(self.idx), kernels::row_sums)
    }

    pub fn select_cols(self, cols: &[usize]) -> Var<'t> {
        let n = self.shape()[1];
        assert!(cols.iter().all(|&c| c < n), "select_cols: column out of range");
        let cols = cols.to_vec();
        let op = Op::SelectCols(self.idx, cols.clone());
        self.tape.unary(self.idx, op, |t| kernels::select_cols(t, &cols))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Var<'t> {
        let tape = parts[0].tape;
        let rows = parts[0].shape()[0];
        for p in parts {
            parts[0].same_tape(p);
            assert_eq!(p.shape()[0], rows, "concat_cols: row mismatch");
        }
        let idx: Vec<usize> = parts.iter().map(|p| p.idx).collect();
        let out = {
            let nodes = tape.nodes.borrow();
            let refs: Vec<&Tensor> = idx.iter().map(|&i| &nodes[i].value).collect();
            kernels::concat_cols(&refs)
        };
        tape.push(out, Op::ConcatCols(idx))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "add");
        self.tape.binary(self.idx, rhs.idx, Op::Add(self.idx, rhs.idx), |a, b| kernels::zip(a, b, |x, y| x + y))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "sub");
        self.tape.binary(self.idx, rhs.idx, Op::Sub(self.idx, rhs.idx), |a, b| kernels::zip(a, b, |x, y| x - y))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "mul");
        self.tape.binary(self.idx, rhs.idx, Op::Mul(self.idx, rhs.idx), |a, b| kernels::zip(a, b, |x, y| x * y))
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.check_same_shape(&rhs, "div");
        self.tape.binary(self.idx, rhs.idx, Op::Div(self.idx, rhs.idx), |a, b| kernels::zip(a, b, |x, y| x / y))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self.idx, Op::Neg(self.idx), |t| t.map(|v| -v))
    }
}

/// Value and gradient of a scalar function of `params`.
pub fn value_and_grad<F>(params: &[Tensor], f: F) -> Result<(f64, Vec<Tensor>)>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&tape, &vars);
    let grads = tape.backward(loss)?;
    let value = loss.value().item();
    Ok((value, vars.iter().map(|&v| grads.wrt(v)).collect()))
}

/// Gradient of a scalar function of `params`, one tensor per parameter.
pub fn grad<F>(params: &[Tensor], f: F) -> Result<Vec<Tensor>>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    value_and_grad(params, f).map(|(_, g)| g)
}
