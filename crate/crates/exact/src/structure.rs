//! Structural checks: the three graph assumptions, d-separation, and the
//! conditions a specification partition must satisfy before a formula is
//! applied.

use serde::Serialize;

use crate::error::{assumption, precondition, ExactError, Result};
use crate::net::{DiscreteBayesNet, Role, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    /// (i) no edge from a specification into a feature.
    pub no_spec_to_feature: bool,
    /// (ii) no edge between two specifications.
    pub no_spec_to_spec: bool,
    /// (iii) the selection variable has no children and only specification parents.
    pub selection_ok: bool,
    pub violations: Vec<(String, String)>,
}

impl StructureReport {
    pub fn passes(&self) -> bool {
        self.no_spec_to_feature && self.no_spec_to_spec && self.selection_ok
    }
}

pub fn check_structure(net: &DiscreteBayesNet) -> StructureReport {
    let mut report =
        StructureReport { no_spec_to_feature: true, no_spec_to_spec: true, selection_ok: true, violations: Vec::new() };
    for child in 0..net.len() {
        for &parent in net.parents(child) {
            let (pr, cr) = (net.variables()[parent].role, net.variables()[child].role);
            let flag = match (pr, cr) {
                (Role::Specification, Role::Feature) => &mut report.no_spec_to_feature,
                (Role::Specification, Role::Specification) => &mut report.no_spec_to_spec,
                (Role::Selection, _) => &mut report.selection_ok,
                (Role::Feature, Role::Selection) => &mut report.selection_ok,
                _ => continue,
            };
            *flag = false;
            report.violations.push((net.name(parent).to_string(), net.name(child).to_string()));
        }
    }
    report
}

/// Whether every node in `a` is d-separated from every node in `b` given
/// `given`, by the reachability ("Bayes ball") procedure.
pub fn d_separated(net: &DiscreteBayesNet, a: &[VarId], b: &[VarId], given: &[VarId]) -> bool {
    let n = net.len();
    let observed: Vec<bool> = (0..n).map(|v| given.contains(&v)).collect();
    // Ancestors of the conditioning set (inclusive) open colliders.
    let mut anc = observed.clone();
    let mut stack: Vec<VarId> = given.to_vec();
    while let Some(v) = stack.pop() {
        for &p in net.parents(v) {
            if !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }
    let children: Vec<Vec<VarId>> = (0..n).map(|v| net.children(v)).collect();
    // State: (node, arrived from a child = moving up).
    let mut visited = vec![[false; 2]; n];
    let mut queue: Vec<(VarId, bool)> = a.iter().map(|&v| (v, true)).collect();
    while let Some((v, up)) = queue.pop() {
        if visited[v][up as usize] {
            continue;
        }
        visited[v][up as usize] = true;
        if !observed[v] && b.contains(&v) {
            return false;
        }
        if up {
            if !observed[v] {
                queue.extend(net.parents(v).iter().map(|&p| (p, true)));
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
        } else {
            if !observed[v] {
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
            if anc[v] {
                queue.extend(net.parents(v).iter().map(|&p| (p, true)));
            }
        }
    }
    true
}

/// Disjoint blocks of specifications plus the shared features `X_c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecificationPartition {
    pub blocks: Vec<Vec<VarId>>,
    pub shared: Vec<VarId>,
}

impl SpecificationPartition {
    pub fn new(net: &DiscreteBayesNet, blocks: Vec<Vec<VarId>>, shared: Vec<VarId>) -> Result<Self> {
        let specs = net.specifications();
        let mut seen: Vec<VarId> = Vec::new();
        for block in &blocks {
            if block.is_empty() {
                return Err(ExactError::Malformed("empty specification block".into()));
            }
            for &z in block {
                if !specs.contains(&z) {
                    return Err(ExactError::Malformed(format!("{} is not a specification", net.name(z))));
                }
                if seen.contains(&z) {
                    return Err(ExactError::Malformed(format!("{} appears in two blocks", net.name(z))));
                }
                seen.push(z);
            }
        }
        if seen.len() != specs.len() {
            return Err(ExactError::Malformed("blocks do not cover every specification".into()));
        }
        let features = net.features();
        if let Some(&x) = shared.iter().find(|x| !features.contains(x)) {
            return Err(ExactError::Malformed(format!("shared variable {} is not a feature", net.name(x))));
        }
        let mut shared = shared;
        shared.sort_unstable();
        shared.dedup();
        Ok(Self { blocks, shared })
    }

    /// One block per specification, with the given shared features.
    pub fn singletons(net: &DiscreteBayesNet, shared: Vec<VarId>) -> Result<Self> {
        Self::new(net, net.specifications().into_iter().map(|z| vec![z]).collect(), shared)
    }

    pub fn by_names(net: &DiscreteBayesNet, blocks: &[&[&str]], shared: &[&str]) -> Result<Self> {
        let id = |name: &&str| net.var(name).ok_or_else(|| ExactError::Malformed(format!("unknown variable {name}")));
        let blocks = blocks.iter().map(|b| b.iter().map(id).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        let shared = shared.iter().map(id).collect::<Result<_>>()?;
        Self::new(net, blocks, shared)
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// Feature parents of the specifications in block `i`, sorted.
    pub fn block_parents(&self, net: &DiscreteBayesNet, i: usize) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.blocks[i]
            .iter()
            .flat_map(|&z| net.parents(z).iter().copied())
            .filter(|&p| net.variables()[p].role == Role::Feature)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `V_i \ X_c` for block `i`.
    pub fn block_private(&self, net: &DiscreteBayesNet, i: usize) -> Vec<VarId> {
        self.block_parents(net, i).into_iter().filter(|x| !self.shared.contains(x)).collect()
    }

    /// Event "every specification of block `i` equals 1".
    pub fn block_event(&self, i: usize) -> Vec<(VarId, usize)> {
        self.blocks[i].iter().map(|&z| (z, 1)).collect()
    }

    /// Event "every specification equals 1".
    pub fn novel_event(&self) -> Vec<(VarId, usize)> {
        (0..self.k()).flat_map(|i| self.block_event(i)).collect()
    }
}

pub(crate) fn require_structure(net: &DiscreteBayesNet) -> Result<()> {
    let report = check_structure(net);
    if !report.passes() {
        return precondition(assumption::STRUCTURE, format!("violating edges {:?}", report.violations));
    }
    Ok(())
}

/// Every feature must be a parent of some block or be shared; otherwise the
/// formulas leave it undetermined.
fn require_coverage(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<()> {
    for x in net.features() {
        let covered = part.shared.contains(&x) || (0..part.k()).any(|i| part.block_parents(net, i).contains(&x));
        if !covered {
            return precondition(
                assumption::FEATURE_COVERAGE,
                format!("{} is not associated with any block", net.name(x)),
            );
        }
    }
    Ok(())
}

/// Conditions for the exact product formula: blocks share no feature
/// parents and no edge joins parents of different blocks.
pub fn validate_no_shared(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<()> {
    require_structure(net)?;
    require_coverage(net, part)?;
    let v: Vec<Vec<VarId>> = (0..part.k()).map(|i| part.block_parents(net, i)).collect();
    for i in 0..part.k() {
        for j in i + 1..part.k() {
            if let Some(&x) = v[i].iter().find(|x| v[j].contains(x)) {
                return precondition(
                    assumption::NO_SHARED,
                    format!("{} is a parent of blocks {i} and {j}", net.name(x)),
                );
            }
            for &a in &v[i] {
                for &b in &v[j] {
                    if net.parents(a).contains(&b) || net.parents(b).contains(&a) {
                        return precondition(
                            assumption::NO_SHARED,
                            format!("edge between {} and {}", net.name(a), net.name(b)),
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

/// Conditions for the shared-feature results: blocks d-separated given
/// `X_c`, and each non-shared feature d-separated from the non-shared
/// features not associated with its block.
pub fn validate_shared(net: &DiscreteBayesNet, part: &SpecificationPartition) -> Result<()> {
    require_structure(net)?;
    require_coverage(net, part)?;
    for i in 0..part.k() {
        for j in i + 1..part.k() {
            if !d_separated(net, &part.blocks[i], &part.blocks[j], &part.shared) {
                return precondition(assumption::BLOCK_INDEPENDENCE, format!("blocks {i} and {j} are d-connected"));
            }
        }
    }
    for i in 0..part.k() {
        let mine = part.block_parents(net, i);
        let others: Vec<VarId> =
            net.features().into_iter().filter(|x| !mine.contains(x) && !part.shared.contains(x)).collect();
        for &x in &part.block_private(net, i) {
            if !d_separated(net, &[x], &others, &part.shared) {
                return precondition(
                    assumption::FEATURE_INDEPENDENCE,
                    format!("{} is d-connected to features outside block {i}", net.name(x)),
                );
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    #[test]
    fn collider_blocks_until_observed() {
        let net = builtins::fig3b_uniform();
        let (x1, x2, z1, z2, s) = (0, 1, 3, 4, 5);
        assert!(!d_separated(&net, &[z1], &[z2], &[]));
        assert!(d_separated(&net, &[z1], &[z2], &[x2]));
        // Observing the selection variable opens the Z1 -> S <- Z2 collider.
        assert!(!d_separated(&net, &[z1], &[z2], &[x2, s]));
        assert!(d_separated(&net, &[x1], &[x2], &[]));
        assert!(!d_separated(&net, &[x1], &[x2], &[z1]));
    }
}
