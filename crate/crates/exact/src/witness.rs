//! Two nets that agree on every selected-data quantity but disagree on
//! `p(X | Z1=1, Z2=1)`.
//!
//! Template: X1, X2 -> Z1 and X2, X3 -> Z2 with root features. Because
//! Z1 and Z2 are independent given X, `p(x) q1 q2` equals
//! `[p q1 (1-q2)] [p (1-q1) q2] / [p (1-q1)(1-q2)]`, so whenever the
//! selected data contain Z = (0,0) the novel conditional is pinned down by
//! the three selected slices. The free direction appears only when the
//! Z = (0,0) slice is unselected as well. Then, with
//! `q_i(x) = P(Z_i=1 | x)` and any positive `h(x2)`, the second net uses
//!
//! - `q_i' = q_i / (h (1 - q_i) + q_i)`,
//! - `p'(x) ∝ p(x) (h (1-q1) + q1) (h (1-q2) + q2) / h`,
//! - the same selection CPT.
//!
//! This leaves `p(x, Z=(1,0))` and `p(x, Z=(0,1))` unchanged up to one
//! constant, multiplies the unselected `Z=(0,0)` mass by `h`, and divides
//! the novel mass by `h`, so the novel conditional is reweighted by
//! `1 / h(x2)`. `p'` factorizes as `p'(x2) p'(x1|x2) p'(x3|x2)`, so both nets
//! carry the edges X2 -> X1 and X2 -> X3 (the first with `p(x1|x2) = p(x1)`).

use serde::Serialize;
use xgen_numerics::Rng;

use crate::error::{assumption, precondition, ExactError, Result};
use crate::factor::joint;
use crate::identify::oracle_novel_conditional;
use crate::net::{DiscreteBayesNet, Role, VarId};
use crate::structure::require_structure;

pub const MIN_TV: f64 = 0.05;
pub const MAX_SELECTED_GAP: f64 = 1e-9;
pub const SEARCH_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip)]
    pub net_a: DiscreteBayesNet,
    #[serde(skip)]
    pub net_b: DiscreteBayesNet,
    /// Max-norm distance between `p(X, Z, S | S=1)` of the two nets.
    pub selected_gap: f64,
    /// Total variation between the two `p(X | Z=1)`.
    pub tv: f64,
}

/// Distances between two nets over the same variables.
pub fn witness_distances(a: &DiscreteBayesNet, b: &DiscreteBayesNet) -> Result<(f64, f64)> {
    let s = a.selection();
    let gap = joint(a)?.condition(&[(s, 1)])?.max_abs_diff(&joint(b)?.condition(&[(s, 1)])?)?;
    let tv = oracle_novel_conditional(a)?.tv_distance(&oracle_novel_conditional(b)?)?;
    Ok((gap, tv))
}

/// Accepts the pair as a witness only if the selected data agree and the
/// novel conditionals differ by at least [`MIN_TV`].
pub fn verify_witness(a: DiscreteBayesNet, b: DiscreteBayesNet) -> Result<Witness> {
    require_structure(&a)?;
    require_structure(&b)?;
    let (selected_gap, tv) = witness_distances(&a, &b)?;
    if selected_gap >= MAX_SELECTED_GAP || tv < MIN_TV {
        return Err(ExactError::WitnessNotFound {
            reason: format!("selected-data gap {selected_gap:e}, novel total variation {tv}"),
            best_tv: tv,
        });
    }
    Ok(Witness { net_a: a, net_b: b, selected_gap, tv })
}

struct Template {
    /// (private feature of Z1, shared feature, private feature of Z2)
    xa: VarId,
    xc: VarId,
    xb: VarId,
    z1: VarId,
    z2: VarId,
    s: VarId,
}

fn parse_template(net: &DiscreteBayesNet) -> Result<Template> {
    let bad = |m: &str| Err(ExactError::Malformed(format!("witness template: {m}")));
    let xs = net.features();
    let zs = net.specifications();
    if xs.len() != 3 || zs.len() != 2 {
        return bad("expected three features and two specifications");
    }
    if xs.iter().any(|&x| !net.parents(x).is_empty()) {
        return bad("features must be root nodes");
    }
    if zs.iter().chain([net.selection()].iter()).any(|&v| net.cardinality(v) != 2) {
        return bad("specifications and selection must be binary");
    }
    let (z1, z2) = (zs[0], zs[1]);
    let (p1, p2) = (net.parents(z1), net.parents(z2));
    if p1.len() != 2 || p2.len() != 2 {
        return bad("each specification needs exactly two feature parents");
    }
    let shared: Vec<VarId> = p1.iter().copied().filter(|x| p2.contains(x)).collect();
    if shared.len() != 1 {
        return bad("specifications must share exactly one feature");
    }
    let xc = shared[0];
    let xa = *p1.iter().find(|&&x| x != xc).expect("two parents");
    let xb = *p2.iter().find(|&&x| x != xc).expect("two parents");
    let s = net.selection();
    let mut sp = net.parents(s).to_vec();
    sp.sort_unstable();
    if sp != [z1, z2] {
        return bad("selection parents must be the two specifications");
    }
    debug_assert!(net.variables()[xa].role == Role::Feature);
    Ok(Template { xa, xc, xb, z1, z2, s })
}

fn root_dist(net: &DiscreteBayesNet, x: VarId) -> Vec<f64> {
    net.cpt(x).to_vec()
}

/// `P(Z=1 | parents)` indexed `[row]` in the net's CPT row order.
fn spec_q(net: &DiscreteBayesNet, z: VarId) -> Vec<f64> {
    net.cpt(z).chunks(2).map(|r| r[1]).collect()
}

/// CPT of `child` given `parent` with every row equal to `rows[parent_value]`.
fn conditional_cpt(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// Re-expresses the template with edges xc -> xa and xc -> xb and CPTs
/// `p(xa|xc)`, `p(xb|xc)`, `p(xc)`.
fn with_shared_parent(
    net: &DiscreteBayesNet,
    t: &Template,
    p_xc: Vec<f64>,
    p_xa: Vec<Vec<f64>>,
    p_xb: Vec<Vec<f64>>,
) -> Result<DiscreteBayesNet> {
    net.with_cpt(t.xc, p_xc)?.with_parents_and_cpt(t.xa, vec![t.xc], conditional_cpt(&p_xa))?.with_parents_and_cpt(
        t.xb,
        vec![t.xc],
        conditional_cpt(&p_xb),
    )
}

/// Row of the Z CPT for values of its two parents.
fn zrow(net: &DiscreteBayesNet, z: VarId, assign: &[(VarId, usize)]) -> usize {
    let mut full = vec![0usize; net.len()];
    for &(v, x) in assign {
        full[v] = x;
    }
    net.cpt_row_index(z, &full)
}

fn build_pair(net: &DiscreteBayesNet, t: &Template, h: &[f64]) -> Result<(DiscreteBayesNet, DiscreteBayesNet)> {
    let (pa, pc, pb) = (root_dist(net, t.xa), root_dist(net, t.xc), root_dist(net, t.xb));
    let (q1, q2) = (spec_q(net, t.z1), spec_q(net, t.z2));
    let net_a = with_shared_parent(net, t, pc.clone(), vec![pa.clone(); pc.len()], vec![pb.clone(); pc.len()])?;

    let r1 = |xa: usize, xc: usize| zrow(net, t.z1, &[(t.xa, xa), (t.xc, xc)]);
    let r2 = |xc: usize, xb: usize| zrow(net, t.z2, &[(t.xc, xc), (t.xb, xb)]);
    let w = |q: f64, hv: f64| hv * (1.0 - q) + q;

    let mut pc_new = vec![0.0; pc.len()];
    let mut pa_new = Vec::with_capacity(pc.len());
    let mut pb_new = Vec::with_capacity(pc.len());
    for xc in 0..pc.len() {
        let wa: Vec<f64> = (0..pa.len()).map(|xa| pa[xa] * w(q1[r1(xa, xc)], h[xc])).collect();
        let wb: Vec<f64> = (0..pb.len()).map(|xb| pb[xb] * w(q2[r2(xc, xb)], h[xc])).collect();
        let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
        pc_new[xc] = pc[xc] * sa * sb / h[xc];
        pa_new.push(normalize(wa.iter().map(|v| v / sa).collect()));
        pb_new.push(normalize(wb.iter().map(|v| v / sb).collect()));
    }
    let zc: f64 = pc_new.iter().sum();
    let pc_new = normalize(pc_new.iter().map(|p| p / zc).collect());

    let mut z1_cpt = vec![0.0; 2 * q1.len()];
    for xa in 0..pa.len() {
        for xc in 0..pc.len() {
            let r = r1(xa, xc);
            let qn = q1[r] / w(q1[r], h[xc]);
            z1_cpt[2 * r] = 1.0 - qn;
            z1_cpt[2 * r + 1] = qn;
        }
    }
    let mut z2_cpt = vec![0.0; 2 * q2.len()];
    for xc in 0..pc.len() {
        for xb in 0..pb.len() {
            let r = r2(xc, xb);
            let qn = q2[r] / w(q2[r], h[xc]);
            z2_cpt[2 * r] = 1.0 - qn;
            z2_cpt[2 * r + 1] = qn;
        }
    }
    let net_b = with_shared_parent(net, t, pc_new, pa_new, pb_new)?.with_cpt(t.z1, z1_cpt)?.with_cpt(t.z2, z2_cpt)?;
    Ok((net_a, net_b))
}

/// Puts rounding residue on the last entry so the row passes validation.
fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let n = row.len();
    let head: f64 = row[..n - 1].iter().sum();
    row[n - 1] = 1.0 - head;
    row
}

pub fn nonidentifiability_witness(template: &DiscreteBayesNet) -> Result<Witness> {
    require_structure(template)?;
    let t = parse_template(template)?;
    let full = joint(template)?;
    let selected = full.condition(&[(t.s, 1)]).or_else(|_| precondition(assumption::SELECTED_MASS, "P(S=1) = 0"))?;
    for z in [t.z1, t.z2] {
        if selected.prob(&[(z, 1)])? <= 0.0 {
            return precondition(assumption::MARGINAL_COVERAGE, format!("P({}=1 | S=1) = 0", template.name(z)));
        }
    }
    if full.prob(&[(t.z1, 1), (t.z2, 1)])? <= 0.0 {
        return precondition(assumption::NOVEL_MASS, "P(Z=1) = 0");
    }
    let observed = selected.prob(&[(t.z1, 1), (t.z2, 1)])?;
    if observed > 0.0 {
        return Err(ExactError::WitnessNotFound {
            reason: format!(
                "the novel combination is observed in the selected data (mass {observed:e}), so it is identified"
            ),
            best_tv: 0.0,
        });
    }

    let cards = template.cardinality(t.xc);
    let mut best_tv = 0.0f64;
    let mut try_pair = |h: &[f64]| -> Result<Option<Witness>> {
        let (a, b) = build_pair(template, &t, h)?;
        let (gap, tv) = witness_distances(&a, &b)?;
        if gap < MAX_SELECTED_GAP {
            best_tv = best_tv.max(tv);
            if tv >= MIN_TV {
                return Ok(Some(Witness { net_a: a, net_b: b, selected_gap: gap, tv }));
            }
        }
        Ok(None)
    };
    for g in [8.0, 0.125, 64.0, 1.0 / 64.0] {
        let h: Vec<f64> = (0..cards).map(|v| f64::powi(g, v as i32)).collect();
        if let Some(w) = try_pair(&h)? {
            return Ok(w);
        }
    }
    let mut rng = Rng::new(0x5eed);
    for _ in 0..SEARCH_BUDGET {
        let h: Vec<f64> = (0..cards).map(|_| 10f64.powf(rng.uniform_scalar(-3.0, 3.0))).collect();
        if let Some(w) = try_pair(&h)? {
            return Ok(w);
        }
    }
    let reason = if selected.prob(&[(t.z1, 0), (t.z2, 0)])? > 0.0 {
        format!(
            "search budget of {SEARCH_BUDGET} trials exhausted; the selected data contain Z=(0,0), \
             which with Z1 and Z2 independent given X identifies the novel conditional"
        )
    } else {
        format!("search budget of {SEARCH_BUDGET} trials exhausted")
    };
    Err(ExactError::WitnessNotFound { reason, best_tv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{fig3b, SelectionKind};

    #[test]
    fn identical_nets_are_not_a_witness() {
        let net = fig3b(&mut Rng::new(4), SelectionKind::ExcludeNovel);
        let err = verify_witness(net.clone(), net).unwrap_err();
        assert!(matches!(err, ExactError::WitnessNotFound { best_tv, .. } if best_tv == 0.0));
    }
}
