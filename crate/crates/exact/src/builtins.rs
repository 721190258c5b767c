//! Built-in topologies and random CPT generators.
//!
//! `fig3a`: X1, X2 -> Z1; X3, X4 -> Z2; Z1, Z2 -> S (no shared feature).
//! `fig3b`: X1, X2 -> Z1; X2, X3 -> Z2; Z1, Z2 -> S (X2 shared).

use xgen_numerics::Rng;

use crate::error::{ExactError, Result};
use crate::factor::joint;
use crate::net::{DiscreteBayesNet, Role, VarId, Variable};

pub const BUILTIN_NAMES: [&str; 2] = ["fig3a", "fig3b"];

/// How the selection CPT `P(S | Z)` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionKind {
    /// `S = 1` always.
    None,
    /// Every `P(S=1 | z)` drawn from (0.1, 0.9).
    Random,
    /// Like `Random`, but `P(S=1 | Z=1) = 0`: the all-ones combination is
    /// never selected.
    ExcludeNovel,
    /// Only combinations with exactly one active specification are ever
    /// selected, each with a random probability.
    OneActive,
}

fn binary(name: &str, role: Role) -> Variable {
    Variable { name: name.into(), role, cardinality: 2 }
}

/// A random distribution over `card` values with every entry at least
/// about `0.05 / card`.
fn random_row(rng: &mut Rng, card: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..card).map(|_| rng.uniform_scalar(0.05, 1.0)).collect();
    let z: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / z).collect();
    // Put the rounding residue on the last entry so rows sum to one exactly
    // enough for validation.
    let head: f64 = row[..card - 1].iter().sum();
    row[card - 1] = 1.0 - head;
    row
}

fn bernoulli_row(p1: f64) -> [f64; 2] {
    [1.0 - p1, p1]
}

fn selection_cpt(rng: &mut Rng, n_specs: usize, kind: SelectionKind) -> Vec<f64> {
    let rows = 1usize << n_specs;
    let mut cpt = Vec::with_capacity(2 * rows);
    for r in 0..rows {
        let p1 = match kind {
            SelectionKind::None => 1.0,
            SelectionKind::Random => rng.uniform_scalar(0.1, 0.9),
            SelectionKind::ExcludeNovel if r == rows - 1 => 0.0,
            SelectionKind::ExcludeNovel => rng.uniform_scalar(0.1, 0.9),
            SelectionKind::OneActive if r.count_ones() == 1 => rng.uniform_scalar(0.1, 0.9),
            SelectionKind::OneActive => 0.0,
        };
        cpt.extend(bernoulli_row(p1));
    }
    cpt
}

fn fig3a_skeleton() -> (Vec<Variable>, Vec<Vec<VarId>>) {
    let vars = vec![
        binary("X1", Role::Feature),
        binary("X2", Role::Feature),
        binary("X3", Role::Feature),
        binary("X4", Role::Feature),
        binary("Z1", Role::Specification),
        binary("Z2", Role::Specification),
        binary("S", Role::Selection),
    ];
    let parents = vec![vec![], vec![], vec![], vec![], vec![0, 1], vec![2, 3], vec![4, 5]];
    (vars, parents)
}

fn fig3b_skeleton() -> (Vec<Variable>, Vec<Vec<VarId>>) {
    let vars = vec![
        binary("X1", Role::Feature),
        binary("X2", Role::Feature),
        binary("X3", Role::Feature),
        binary("Z1", Role::Specification),
        binary("Z2", Role::Specification),
        binary("S", Role::Selection),
    ];
    let parents = vec![vec![], vec![], vec![], vec![0, 1], vec![1, 2], vec![3, 4]];
    (vars, parents)
}

/// Random CPTs for every non-selection variable of a skeleton, plus a
/// selection CPT of the given kind.
pub fn random_net(
    rng: &mut Rng,
    vars: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
    selection: SelectionKind,
) -> Result<DiscreteBayesNet> {
    let mut cpts = Vec::with_capacity(vars.len());
    for (v, var) in vars.iter().enumerate() {
        if var.role == Role::Selection {
            if parents[v].iter().any(|&p| vars[p].cardinality != 2) {
                return Err(ExactError::Malformed("selection CPT generator needs binary specifications".into()));
            }
            cpts.push(selection_cpt(rng, parents[v].len(), selection));
            continue;
        }
        let rows: usize = parents[v].iter().map(|&p| vars[p].cardinality).product();
        cpts.push((0..rows).flat_map(|_| random_row(rng, var.cardinality)).collect());
    }
    DiscreteBayesNet::new(vars, parents, cpts)
}

pub fn fig3a(rng: &mut Rng, selection: SelectionKind) -> DiscreteBayesNet {
    let (vars, parents) = fig3a_skeleton();
    random_net(rng, vars, parents, selection).expect("builtin skeleton is valid")
}

pub fn fig3b(rng: &mut Rng, selection: SelectionKind) -> DiscreteBayesNet {
    let (vars, parents) = fig3b_skeleton();
    random_net(rng, vars, parents, selection).expect("builtin skeleton is valid")
}

/// Fig. 3(b) topology with every CPT row uniform except selection, which
/// excludes the all-ones combination.
pub fn fig3b_uniform() -> DiscreteBayesNet {
    let (vars, parents) = fig3b_skeleton();
    let mut cpts: Vec<Vec<f64>> = vec![vec![0.5; 2]; 3];
    cpts.push(vec![0.5; 8]);
    cpts.push(vec![0.5; 8]);
    cpts.push(vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 0.0]);
    DiscreteBayesNet::new(vars, parents, cpts).expect("valid")
}

/// A builtin topology by name, with CPTs drawn from `rng`. `fig3a` selects
/// every combination but the novel one; `fig3b` selects only rows with
/// exactly one active specification, the regime where its novel conditional
/// is not identified.
pub fn builtin(name: &str, rng: &mut Rng) -> Result<DiscreteBayesNet> {
    match name {
        "fig3a" => Ok(fig3a(rng, SelectionKind::ExcludeNovel)),
        "fig3b" => Ok(fig3b(rng, SelectionKind::OneActive)),
        other => Err(ExactError::Malformed(format!("unknown builtin {other}; expected one of {BUILTIN_NAMES:?}"))),
    }
}

/// Fig. 3(b) net with both specification rates scaled by `t`, so they
/// rarely co-occur. Selection drops exactly the rows with Z = (1, 1).
fn leaky_net(x_rows: &[[f64; 2]; 3], b1: &[f64; 4], b2: &[f64; 4], t: f64) -> DiscreteBayesNet {
    let (vars, parents) = fig3b_skeleton();
    let mut cpts: Vec<Vec<f64>> = x_rows.iter().map(|r| r.to_vec()).collect();
    // Z1 rows over (X1, X2); Z2 rows over (X2, X3).
    let z1: Vec<f64> = (0..4).flat_map(|r| bernoulli_row(t * b1[r])).collect();
    let z2: Vec<f64> = (0..4).flat_map(|r| bernoulli_row(t * b2[r])).collect();
    cpts.push(z1);
    cpts.push(z2);
    cpts.push(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    DiscreteBayesNet::new(vars, parents, cpts).expect("valid")
}

/// Selection leakage `max(P(S=0), P(S=0 | Z1=1), P(S=0 | Z2=1))`.
pub fn leakage(net: &DiscreteBayesNet) -> Result<f64> {
    let j = joint(net)?;
    let s = net.selection();
    let mut worst = j.prob(&[(s, 0)])?;
    for z in net.specifications() {
        worst = worst.max(j.condition(&[(z, 1)])?.prob(&[(s, 0)])?);
    }
    Ok(worst)
}

/// Random Fig. 3(b) net with selection leakage exactly `delta` (to
/// bisection precision). `delta = 0` gives the same CPTs with no
/// selection at all.
pub fn fig3b_with_leakage(rng: &mut Rng, delta: f64) -> Result<DiscreteBayesNet> {
    let x_rows = [0, 1, 2].map(|_| {
        let p = rng.uniform_scalar(0.2, 0.8);
        [1.0 - p, p]
    });
    let b1 = [0, 1, 2, 3].map(|_| rng.uniform_scalar(0.2, 0.9));
    let b2 = [0, 1, 2, 3].map(|_| rng.uniform_scalar(0.2, 0.9));
    if delta == 0.0 {
        let net = leaky_net(&x_rows, &b1, &b2, 1.0);
        let s = net.selection();
        return net.with_cpt(s, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }
    let at = |t: f64| leakage(&leaky_net(&x_rows, &b1, &b2, t));
    let max = at(1.0)?;
    if !(delta > 0.0 && delta <= max) {
        return Err(ExactError::Malformed(format!("leakage {delta} outside (0, {max}]")));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(leaky_net(&x_rows, &b1, &b2, 0.5 * (lo + hi)))
}

/// Fig. 3(b) net where Z1 = 1 is only possible with X2 = 0 and Z2 = 1 only
/// with X2 = 1, so no shared-feature value supports both.
pub fn fig3b_disjoint_support(rng: &mut Rng) -> DiscreteBayesNet {
    let mut net = fig3b(rng, SelectionKind::Random);
    let b1: Vec<f64> = (0..4).map(|_| rng.uniform_scalar(0.2, 0.9)).collect();
    let b2: Vec<f64> = (0..4).map(|_| rng.uniform_scalar(0.2, 0.9)).collect();
    let z1: Vec<f64> = (0..4).flat_map(|r| bernoulli_row(if r % 2 == 1 { 0.0 } else { b1[r] })).collect();
    let z2: Vec<f64> = (0..4).flat_map(|r| bernoulli_row(if r / 2 == 0 { 0.0 } else { b2[r] })).collect();
    net = net.with_cpt(3, z1).expect("valid");
    net.with_cpt(4, z2).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_well_formed() {
        let mut rng = Rng::new(1);
        for name in BUILTIN_NAMES {
            let net = builtin(name, &mut rng).unwrap();
            assert!(joint(&net).unwrap().total() > 0.999_999);
        }
        assert!(builtin("fig9", &mut rng).is_err());
    }

    #[test]
    fn leakage_hits_its_target() {
        let mut rng = Rng::new(2);
        for delta in [0.1, 0.01, 0.001] {
            let net = fig3b_with_leakage(&mut rng, delta).unwrap();
            assert!((leakage(&net).unwrap() - delta).abs() < 1e-9 * delta.max(1e-3));
        }
        let none = fig3b_with_leakage(&mut rng, 0.0).unwrap();
        assert_eq!(leakage(&none).unwrap(), 0.0);
    }
}
