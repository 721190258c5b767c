use proptest::prelude::*;
use xgen_numerics::check::max_gradient_error;
use xgen_numerics::{Tape, Tensor, Var};

const TOL: f64 = 1e-5;

fn mat(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

// A fixed random-ish weighting makes every output entry matter differently,
// so a wrong per-element gradient cannot hide behind a symmetric sum.
fn weigh<'t>(tape: &'t Tape, v: Var<'t>) -> Var<'t> {
    let shape = v.shape();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * ((i * 7 + 3) % 11) as f64).collect();
    (v * tape.constant(Tensor::new(shape, w).unwrap())).sum()
}

fn check<F>(params: &[Tensor], f: F)
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let err = max_gradient_error(params, f).unwrap();
    assert!(err < TOL, "relative gradient error {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn add_sub_mul(a in mat(2, 3, -2.0, 2.0), b in mat(2, 3, -2.0, 2.0)) {
        check(&[a.clone(), b.clone()], |t, p| weigh(t, p[0] + p[1]));
        check(&[a.clone(), b.clone()], |t, p| weigh(t, p[0] - p[1]));
        check(&[a, b], |t, p| weigh(t, p[0] * p[1]));
    }

    #[test]
    fn div(a in mat(2, 3, -2.0, 2.0), b in mat(2, 3, 0.5, 2.0)) {
        check(&[a, b], |t, p| weigh(t, p[0] / p[1]));
    }

    #[test]
    fn matmul(a in mat(3, 4, -1.0, 1.0), b in mat(4, 2, -1.0, 1.0)) {
        check(&[a, b], |t, p| weigh(t, p[0].matmul(p[1])));
    }

    #[test]
    fn row_broadcasts(a in mat(3, 2, -1.0, 1.0), r in mat(1, 2, -1.0, 1.0)) {
        check(&[a.clone(), r.clone()], |t, p| weigh(t, p[0].add_row(p[1])));
        check(&[a, r], |t, p| weigh(t, p[0].mul_row(p[1])));
    }

    #[test]
    fn scalar_affine(a in mat(2, 2, -2.0, 2.0), c in -3.0f64..3.0) {
        check(std::slice::from_ref(&a), |t, p| weigh(t, -p[0]));
        check(std::slice::from_ref(&a), move |t, p| weigh(t, p[0].scale(c)));
        check(&[a], move |t, p| weigh(t, p[0].add_scalar(c).square()));
    }

    #[test]
    fn elementwise_nonlinearities(a in mat(2, 3, -3.0, 3.0)) {
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].exp()));
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].tanh()));
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].softplus()));
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].sigmoid()));
        check(&[a], |t, p| weigh(t, p[0].square()));
    }

    #[test]
    fn log(a in mat(2, 3, 0.2, 4.0)) {
        check(&[a], |t, p| weigh(t, p[0].ln()));
    }

    #[test]
    fn reductions(a in mat(3, 4, -2.0, 2.0)) {
        check(std::slice::from_ref(&a), |_, p| p[0].sum());
        check(std::slice::from_ref(&a), |_, p| p[0].mean());
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].row_sum()));
        check(&[a], |_, p| p[0].square().mean());
    }

    #[test]
    fn column_plumbing(a in mat(3, 4, -2.0, 2.0), b in mat(3, 2, -2.0, 2.0)) {
        check(std::slice::from_ref(&a), |t, p| weigh(t, p[0].select_cols(&[3, 0, 0])));
        check(&[a, b], |t, p| weigh(t, Var::concat_cols(&[p[1], p[0], p[1]])));
    }

    #[test]
    fn two_layer_network(
        x in mat(5, 3, -1.0, 1.0),
        w1 in mat(3, 8, -1.0, 1.0),
        b1 in mat(1, 8, -0.5, 0.5),
        w2 in mat(8, 2, -1.0, 1.0),
        b2 in mat(1, 2, -0.5, 0.5),
        y in mat(5, 2, -1.0, 1.0),
    ) {
        check(&[x, w1, b1, w2, b2, y], |_, p| {
            let h = p[0].matmul(p[1]).add_row(p[2]).tanh();
            let out = h.matmul(p[3]).add_row(p[4]);
            (out - p[5]).square().mean()
        });
    }
}
