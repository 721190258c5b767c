//! Identification of `p(X | Z = 1)` from the selected distribution
//! `p^D(.) = p(. | S = 1)`.
//!
//! Every formula here reads only `condition(joint, S=1)`. The full joint is
//! touched for assumption checks on the population (`P(Z=1) > 0`) and for
//! the internal verification of a constructed point.

use serde::Serialize;

use crate::error::{assumption, precondition, ExactError, Result};
use crate::factor::{for_each_assignment, joint, Factor};
use crate::net::{DiscreteBayesNet, VarId};
use crate::structure::{validate_no_shared, validate_shared, SpecificationPartition};

/// Selected distribution plus the per-block conditionals `p^D(. | Z_i = 1)`.
struct GivenData {
    full: Factor,
    selected: Factor,
    per_block: Vec<Factor>,
}

fn given_data(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<GivenData> {
    let full = joint(net)?;
    let s = net.selection();
    let selected = full.condition(&[(s, 1)]).or_else(|_| precondition(assumption::SELECTED_MASS, "P(S=1) = 0"))?;
    let mut per_block = Vec::with_capacity(part.k());
    for i in 0..part.k() {
        let c = selected
            .condition(&part.block_event(i))
            .or_else(|_| precondition(assumption::MARGINAL_COVERAGE, format!("P(Z_{}=1 | S=1) = 0", i + 1)))?;
        per_block.push(c);
    }
    Ok(GivenData { full, selected, per_block })
}

fn require_novel_mass(data: &GivenData, part: &SpecificationPartition) -> Result<()> {
    if data.full.prob(&part.novel_event())? <= 0.0 {
        return precondition(assumption::NOVEL_MASS, "P(Z=1) = 0");
    }
    Ok(())
}

/// Normalized factor over the features (declaration order) whose
/// unnormalized value at each assignment is `f(full_assignment)`.
fn feature_factor(net: &DiscreteBayesNet, mut f: impl FnMut(&[usize]) -> Result<f64>) -> Result<Factor> {
    let xs = net.features();
    let cards: Vec<usize> = xs.iter().map(|&x| net.cardinality(x)).collect();
    let mut full = vec![0usize; net.len()];
    let mut table = vec![0.0; cards.iter().product()];
    let mut err = None;
    for_each_assignment(&cards, |i, a| {
        if err.is_some() {
            return;
        }
        for (&x, &v) in xs.iter().zip(a) {
            full[x] = v;
        }
        match f(&full) {
            Ok(v) => table[i] = v,
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Factor::new(xs, cards, table)?.normalized()
}

/// Brute-force `p(X | Z = 1)` from the full joint.
pub fn oracle_novel_conditional(net: &DiscreteBayesNet) -> Result<Factor> {
    let event: Vec<(VarId, usize)> = net.specifications().into_iter().map(|z| (z, 1)).collect();
    joint(net)?.condition(&event)?.marginalize(&net.features())
}

/// Product formula `prod_i p^D(V_i | Z_i = 1)` for partitions whose blocks
/// share no features.
pub fn identify_no_shared(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<Factor> {
    validate_no_shared(net, part)?;
    let data = given_data(net, part)?;
    require_novel_mass(&data, part)?;
    let terms: Vec<Factor> =
        (0..part.k()).map(|i| data.per_block[i].marginalize(&part.block_parents(net, i))).collect::<Result<_>>()?;
    feature_factor(net, |full| Ok(terms.iter().map(|t| t.at_net(full)).product()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivePoint {
    /// Feature variables in declaration order.
    pub features: Vec<VarId>,
    pub values: Vec<usize>,
    /// Max-min score `min_i p^D(x_c | Z_i = 1)` of the chosen shared value.
    pub shared_score: f64,
    /// Enumerated `p(X = x | Z = 1)`.
    pub probability: f64,
}

/// Builds an assignment with positive probability under `p(X | Z = 1)` from
/// given-data quantities only, then verifies it by enumeration.
pub fn construct_positive_point(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<PositivePoint> {
    validate_shared(net, part)?;
    let data = given_data(net, part)?;
    let xc = &part.shared;
    let on_shared: Vec<Factor> = data.per_block.iter().map(|c| c.marginalize(xc)).collect::<Result<_>>()?;
    let cards: Vec<usize> = xc.iter().map(|&x| net.cardinality(x)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_assignment(&cards, |_, a| {
        let score = on_shared.iter().map(|f| f.at(a)).fold(f64::INFINITY, f64::min);
        if score > 0.0 && best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, a.to_vec()));
        }
    });
    let Some((shared_score, xc_vals)) = best else {
        return Err(ExactError::ExistenceFailure(format!(
            "{}: no value of the shared features has positive density under every block",
            assumption::OVERLAP
        )));
    };
    let mut full = vec![0usize; net.len()];
    for (&x, &v) in xc.iter().zip(&xc_vals) {
        full[x] = v;
    }
    let xc_event: Vec<(VarId, usize)> = xc.iter().copied().zip(xc_vals.iter().copied()).collect();
    for (i, block) in data.per_block.iter().enumerate() {
        let private = part.block_private(net, i);
        if private.is_empty() {
            continue;
        }
        let cond = block.condition(&xc_event)?.marginalize(&private)?;
        let (idx, _) =
            cond.table()
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        let mut chosen = Vec::new();
        for_each_assignment(cond.cards(), |j, a| {
            if j == idx {
                chosen = a.to_vec();
            }
        });
        for (&x, &v) in private.iter().zip(&chosen) {
            full[x] = v;
        }
    }
    require_novel_mass(&data, part)?;
    let features = net.features();
    let oracle = oracle_novel_conditional(net)?;
    let probability = oracle.at_net(&full);
    if probability <= 0.0 {
        return Err(ExactError::ExistenceFailure(
            "constructed point has zero probability under the enumerated novel conditional".into(),
        ));
    }
    Ok(PositivePoint { values: features.iter().map(|&x| full[x]).collect(), features, shared_score, probability })
}

/// Approximate `p(X | Z = 1)` under low selection leakage:
/// `prod_i p^D(X_c | Z_i=1) / p^D(X_c)^(k-1) * prod_i p^D(V_i \ X_c | X_c, Z_i=1)`,
/// normalized over X.
pub fn conservative_identify(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<Factor> {
    validate_shared(net, part)?;
    let data = given_data(net, part)?;
    require_novel_mass(&data, part)?;
    let xc = &part.shared;
    let k = part.k();
    let p_xc = data.selected.marginalize(xc)?;
    let shared_terms: Vec<Factor> = data.per_block.iter().map(|c| c.marginalize(xc)).collect::<Result<_>>()?;
    // p^D(V_i \ X_c, X_c | Z_i=1); divided by the shared term to get the conditional.
    let block_terms: Vec<Factor> = (0..k)
        .map(|i| {
            let mut keep = part.block_private(net, i);
            keep.extend(xc.iter().copied());
            data.per_block[i].marginalize(&keep)
        })
        .collect::<Result<_>>()?;
    feature_factor(net, |full| {
        let mut value = 1.0;
        for i in 0..k {
            let shared = shared_terms[i].at_net(full);
            if shared == 0.0 {
                return Ok(0.0);
            }
            // p^D(X_c|Z_i=1) * p^D(V_i\X_c | X_c, Z_i=1) = p^D(V_i \ X_c, X_c | Z_i=1).
            value *= block_terms[i].at_net(full);
        }
        if k > 1 {
            let denom = p_xc.at_net(full);
            if denom == 0.0 {
                return Err(ExactError::DivisionSingularity { cell: xc.iter().map(|&x| full[x]).collect() });
            }
            value /= denom.powi(k as i32 - 1);
        }
        Ok(value)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{fig3a, fig3b, SelectionKind};
    use xgen_numerics::Rng;

    #[test]
    fn single_block_collapses_to_the_given_conditional() {
        let mut rng = Rng::new(5);
        let net = fig3a(&mut rng, SelectionKind::Random);
        let z: Vec<VarId> = net.specifications();
        let part = SpecificationPartition::new(&net, vec![z.clone()], vec![]).unwrap();
        let got = identify_no_shared(&net, &part).unwrap();
        let s = net.selection();
        let event: Vec<(VarId, usize)> = z.iter().map(|&v| (v, 1)).chain([(s, 1)]).collect();
        let want = joint(&net).unwrap().condition(&event).unwrap().marginalize(&net.features()).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
        let cons = conservative_identify(&net, &part).unwrap();
        assert!(cons.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn shared_feature_is_rejected_by_the_product_formula() {
        let net = fig3b(&mut Rng::new(0), SelectionKind::ExcludeNovel);
        let part = SpecificationPartition::singletons(&net, vec![]).unwrap();
        let err = identify_no_shared(&net, &part).unwrap_err();
        assert!(matches!(err, ExactError::Precondition { assumption: a, .. } if a == assumption::NO_SHARED));
    }
}
