//! Discrete Bayesian networks over features, specifications and one
//! selection variable.
//!
//! CPT layout: the parents of a variable are ordered by declaration order of
//! the variables, and CPT rows run over parent assignments in lexicographic
//! order (first parent most significant). Each row lists the probabilities of
//! the child's values `0..cardinality`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ExactError, Result};

pub type VarId = usize;

/// Largest joint state space the enumeration oracle accepts.
pub const ENUMERATION_BOUND: usize = 1 << 22;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Feature,
    Specification,
    Selection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub role: Role,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBayesNet {
    variables: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
    cpts: Vec<Vec<f64>>,
}

/// On-disk form of a net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetFile {
    pub variables: Vec<Variable>,
    pub edges: Vec<(String, String)>,
    pub cpts: BTreeMap<String, Vec<Vec<f64>>>,
}

fn malformed<T>(msg: impl Into<String>) -> Result<T> {
    Err(ExactError::Malformed(msg.into()))
}

impl DiscreteBayesNet {
    /// Builds and validates a net. `parents[v]` may be given in any order;
    /// it is sorted into declaration order, which fixes the CPT row layout.
    /// `cpts[v]` is the flattened table, `rows * cardinality` long.
    pub fn new(variables: Vec<Variable>, parents: Vec<Vec<VarId>>, cpts: Vec<Vec<f64>>) -> Result<Self> {
        let n = variables.len();
        if n == 0 {
            return malformed("no variables");
        }
        if parents.len() != n || cpts.len() != n {
            return malformed("parents and cpts must have one entry per variable");
        }
        for (i, v) in variables.iter().enumerate() {
            if v.cardinality < 2 {
                return malformed(format!("{} has cardinality {} < 2", v.name, v.cardinality));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return malformed(format!("duplicate variable name {}", v.name));
            }
        }
        let selections = variables.iter().filter(|v| v.role == Role::Selection).count();
        if selections != 1 {
            return malformed(format!("expected exactly one selection variable, found {selections}"));
        }
        let mut parents = parents;
        for (v, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            if ps.windows(2).any(|w| w[0] == w[1]) {
                return malformed(format!("duplicate parent of {}", variables[v].name));
            }
            if let Some(&bad) = ps.iter().find(|&&p| p >= n || p == v) {
                return malformed(format!("invalid parent index {bad} for {}", variables[v].name));
            }
        }
        let net = Self { variables, parents, cpts };
        if net.topological_order().is_none() {
            return malformed("graph has a directed cycle");
        }
        for v in 0..n {
            let card = net.variables[v].cardinality;
            let rows = net.cpt_rows(v);
            let cpt = &net.cpts[v];
            if cpt.len() != rows * card {
                return malformed(format!(
                    "CPT of {} has {} entries, expected {}",
                    net.variables[v].name,
                    cpt.len(),
                    rows * card
                ));
            }
            for (r, row) in cpt.chunks(card).enumerate() {
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return malformed(format!("CPT row {r} of {} has a negative entry", net.variables[v].name));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return malformed(format!("CPT row {r} of {} sums to {s}", net.variables[v].name));
                }
            }
        }
        Ok(net)
    }

    pub fn from_file_repr(file: NetFile) -> Result<Self> {
        let index = |name: &str| -> Result<VarId> {
            file.variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| ExactError::Malformed(format!("unknown variable {name}")))
        };
        let n = file.variables.len();
        let mut parents = vec![Vec::new(); n];
        for (from, to) in &file.edges {
            parents[index(to)?].push(index(from)?);
        }
        if let Some(name) = file.cpts.keys().find(|k| index(k).is_err()) {
            return malformed(format!("CPT given for unknown variable {name}"));
        }
        let mut cpts = Vec::with_capacity(n);
        for v in &file.variables {
            let rows =
                file.cpts.get(&v.name).ok_or_else(|| ExactError::Malformed(format!("missing CPT for {}", v.name)))?;
            if rows.iter().any(|r| r.len() != v.cardinality) {
                return malformed(format!("CPT row of {} has the wrong width", v.name));
            }
            cpts.push(rows.iter().flatten().copied().collect());
        }
        Self::new(file.variables, parents, cpts)
    }

    pub fn to_file_repr(&self) -> NetFile {
        let mut edges = Vec::new();
        for (v, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.push((self.variables[p].name.clone(), self.variables[v].name.clone()));
            }
        }
        let cpts = self
            .variables
            .iter()
            .enumerate()
            .map(|(v, var)| (var.name.clone(), self.cpts[v].chunks(var.cardinality).map(<[f64]>::to_vec).collect()))
            .collect();
        NetFile { variables: self.variables.clone(), edges, cpts }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(text).map_err(|e| ExactError::Io(e.to_string()))?;
        Self::from_file_repr(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_repr()).expect("net serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExactError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.variables[v].name
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn cardinality(&self, v: VarId) -> usize {
        self.variables[v].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.parents[v]
    }

    pub fn children(&self, v: VarId) -> Vec<VarId> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&v)).collect()
    }

    pub fn cpt(&self, v: VarId) -> &[f64] {
        &self.cpts[v]
    }

    pub fn cpt_rows(&self, v: VarId) -> usize {
        self.parents[v].iter().map(|&p| self.variables[p].cardinality).product()
    }

    pub fn with_role(&self, role: Role) -> Vec<VarId> {
        (0..self.len()).filter(|&v| self.variables[v].role == role).collect()
    }

    pub fn features(&self) -> Vec<VarId> {
        self.with_role(Role::Feature)
    }

    pub fn specifications(&self) -> Vec<VarId> {
        self.with_role(Role::Specification)
    }

    pub fn selection(&self) -> VarId {
        self.with_role(Role::Selection)[0]
    }

    /// Row index of the CPT of `v` for a full assignment `values` of the net.
    pub fn cpt_row_index(&self, v: VarId, values: &[usize]) -> usize {
        self.parents[v].iter().fold(0, |acc, &p| acc * self.variables[p].cardinality + values[p])
    }

    /// `P(v = values[v] | parents = values[parents])`.
    pub fn local_prob(&self, v: VarId, values: &[usize]) -> f64 {
        let card = self.variables[v].cardinality;
        self.cpts[v][self.cpt_row_index(v, values) * card + values[v]]
    }

    pub fn state_count(&self) -> u128 {
        self.variables.iter().map(|v| v.cardinality as u128).product()
    }

    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<VarId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in 0..n {
                if self.parents[c].contains(&v) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Copy with an extra edge and a replacement CPT for its child.
    pub fn with_parents_and_cpt(&self, v: VarId, parents: Vec<VarId>, cpt: Vec<f64>) -> Result<Self> {
        let mut ps = self.parents.clone();
        let mut cpts = self.cpts.clone();
        ps[v] = parents;
        cpts[v] = cpt;
        Self::new(self.variables.clone(), ps, cpts)
    }

    /// Copy with a replacement CPT for `v` (same parents).
    pub fn with_cpt(&self, v: VarId, cpt: Vec<f64>) -> Result<Self> {
        self.with_parents_and_cpt(v, self.parents[v].clone(), cpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin(name: &str, role: Role) -> Variable {
        Variable { name: name.into(), role, cardinality: 2 }
    }

    fn tiny() -> DiscreteBayesNet {
        DiscreteBayesNet::new(
            vec![coin("X", Role::Feature), coin("Z", Role::Specification), coin("S", Role::Selection)],
            vec![vec![], vec![0], vec![1]],
            vec![vec![0.4, 0.6], vec![0.9, 0.1, 0.2, 0.8], vec![0.5, 0.5, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let net = tiny();
        assert_eq!(DiscreteBayesNet::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn rejects_bad_rows_and_cycles() {
        let vars = vec![coin("X", Role::Feature), coin("Z", Role::Specification), coin("S", Role::Selection)];
        let bad_row = DiscreteBayesNet::new(
            vars.clone(),
            vec![vec![], vec![0], vec![1]],
            vec![vec![0.4, 0.5], vec![0.9, 0.1, 0.2, 0.8], vec![0.5, 0.5, 1.0, 0.0]],
        );
        assert!(matches!(bad_row, Err(ExactError::Malformed(_))));
        let cyclic = DiscreteBayesNet::new(
            vars,
            vec![vec![1], vec![0], vec![1]],
            vec![vec![0.5; 4], vec![0.5; 4], vec![0.5; 4]],
        );
        assert!(matches!(cyclic, Err(ExactError::Malformed(m)) if m.contains("cycle")));
    }

    #[test]
    fn requires_a_single_selection_variable() {
        let r = DiscreteBayesNet::new(vec![coin("X", Role::Feature)], vec![vec![]], vec![vec![0.5, 0.5]]);
        assert!(r.is_err());
    }

    #[test]
    fn cpt_rows_follow_declaration_order() {
        let net = tiny();
        // Z=1 given X=1 is the last entry of row 1.
        assert_eq!(net.local_prob(1, &[1, 1, 0]), 0.8);
        assert_eq!(net.local_prob(2, &[0, 1, 1]), 0.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"variables":[],"edges":[],"cpts":{},"extra":1}"#;
        assert!(matches!(DiscreteBayesNet::from_json(text), Err(ExactError::Io(_))));
    }
}
