//! Tabular factors and the brute-force enumeration oracle.
//!
//! A factor's table is row-major over its scope with the last variable
//! varying fastest. Conditioning keeps the scope and zeroes inconsistent
//! cells, so conditioning on a full assignment leaves a point mass.

use crate::error::{ExactError, Result};
use crate::net::{DiscreteBayesNet, VarId, ENUMERATION_BOUND};

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

/// Calls `f(index, assignment)` for every assignment of `cards`, in table
/// order.
pub fn for_each_assignment(cards: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = cards.iter().product();
    let mut a = vec![0; cards.len()];
    for idx in 0..total {
        f(idx, &a);
        for d in (0..cards.len()).rev() {
            a[d] += 1;
            if a[d] < cards[d] {
                break;
            }
            a[d] = 0;
        }
    }
}

fn describe(event: &[(VarId, usize)]) -> String {
    let parts: Vec<String> = event.iter().map(|(v, x)| format!("v{v}={x}")).collect();
    format!("{{{}}}", parts.join(", "))
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(ExactError::Malformed("scope and cardinalities differ in length".into()));
        }
        let n: usize = cards.iter().product();
        if n != table.len() {
            return Err(ExactError::Malformed(format!("factor table has {} cells, expected {n}", table.len())));
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ExactError::Malformed("factor entries must be finite and nonnegative".into()));
        }
        Ok(Self { scope, cards, table })
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    fn position(&self, v: VarId) -> Result<usize> {
        self.scope.iter().position(|&s| s == v).ok_or(ExactError::NotInScope(v))
    }

    /// Table index of an assignment listed in scope order.
    pub fn index(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.cards).fold(0, |acc, (&x, &c)| acc * c + x)
    }

    /// Value at an assignment listed in scope order.
    pub fn at(&self, values: &[usize]) -> f64 {
        self.table[self.index(values)]
    }

    /// Value at the restriction of a full net assignment (indexed by VarId).
    pub fn at_net(&self, full: &[usize]) -> f64 {
        let idx = self.scope.iter().zip(&self.cards).fold(0, |acc, (&v, &c)| acc * c + full[v]);
        self.table[idx]
    }

    pub fn normalized(&self) -> Result<Factor> {
        let z = self.total();
        if z <= 0.0 {
            return Err(ExactError::UndefinedConditional { event: "normalization of an all-zero factor".into() });
        }
        Ok(Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            table: self.table.iter().map(|p| p / z).collect(),
        })
    }

    /// Zeroes cells inconsistent with `event` and renormalizes.
    pub fn condition(&self, event: &[(VarId, usize)]) -> Result<Factor> {
        let pos: Vec<(usize, usize)> = event.iter().map(|&(v, x)| Ok((self.position(v)?, x))).collect::<Result<_>>()?;
        let mut table = vec![0.0; self.table.len()];
        for_each_assignment(&self.cards, |i, a| {
            if pos.iter().all(|&(p, x)| a[p] == x) {
                table[i] = self.table[i];
            }
        });
        let z: f64 = table.iter().sum();
        if z <= 0.0 {
            return Err(ExactError::UndefinedConditional { event: describe(event) });
        }
        table.iter_mut().for_each(|p| *p /= z);
        Ok(Factor { scope: self.scope.clone(), cards: self.cards.clone(), table })
    }

    /// Sums out everything but `keep`. The result lists `keep` in this
    /// factor's scope order.
    pub fn marginalize(&self, keep: &[VarId]) -> Result<Factor> {
        for &v in keep {
            self.position(v)?;
        }
        let kept: Vec<usize> = (0..self.scope.len()).filter(|&p| keep.contains(&self.scope[p])).collect();
        let cards: Vec<usize> = kept.iter().map(|&p| self.cards[p]).collect();
        let mut table = vec![0.0; cards.iter().product()];
        for_each_assignment(&self.cards, |i, a| {
            let j = kept.iter().fold(0, |acc, &p| acc * self.cards[p] + a[p]);
            table[j] += self.table[i];
        });
        Ok(Factor { scope: kept.iter().map(|&p| self.scope[p]).collect(), cards, table })
    }

    /// Probability of a partial assignment (sum of consistent cells).
    pub fn prob(&self, event: &[(VarId, usize)]) -> Result<f64> {
        let pos: Vec<(usize, usize)> = event.iter().map(|&(v, x)| Ok((self.position(v)?, x))).collect::<Result<_>>()?;
        let mut s = 0.0;
        for_each_assignment(&self.cards, |i, a| {
            if pos.iter().all(|&(p, x)| a[p] == x) {
                s += self.table[i];
            }
        });
        Ok(s)
    }

    fn check_same_scope(&self, other: &Factor) -> Result<()> {
        if self.scope != other.scope || self.cards != other.cards {
            return Err(ExactError::ScopeMismatch(self.scope.clone(), other.scope.clone()));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Factor) -> Result<f64> {
        self.check_same_scope(other)?;
        Ok(self.table.iter().zip(&other.table).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    pub fn tv_distance(&self, other: &Factor) -> Result<f64> {
        self.check_same_scope(other)?;
        Ok(0.5 * self.table.iter().zip(&other.table).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

/// Full joint distribution of `net` by enumeration.
pub fn joint(net: &DiscreteBayesNet) -> Result<Factor> {
    let states = net.state_count();
    if states > ENUMERATION_BOUND as u128 {
        return Err(ExactError::EnumerationBound { states, bound: ENUMERATION_BOUND });
    }
    let cards = net.cardinalities();
    let mut table = vec![0.0; states as usize];
    for_each_assignment(&cards, |i, a| {
        table[i] = (0..net.len()).map(|v| net.local_prob(v, a)).product();
    });
    // Each CPT row sums to one only up to rounding; renormalize to bound drift.
    let z: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= z);
    Factor::new((0..net.len()).collect(), cards, table)
}

pub fn condition(f: &Factor, event: &[(VarId, usize)]) -> Result<Factor> {
    f.condition(event)
}

pub fn marginalize(f: &Factor, keep: &[VarId]) -> Result<Factor> {
    f.marginalize(keep)
}

/// `I(A; B | C)` in nats under the distribution `f`.
pub fn conditional_mutual_information(f: &Factor, a: &[VarId], b: &[VarId], c: &[VarId]) -> Result<f64> {
    let f = f.normalized()?;
    let union = |xs: &[&[VarId]]| -> Vec<VarId> {
        let mut out: Vec<VarId> = xs.iter().flat_map(|s| s.iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    };
    let abc = f.marginalize(&union(&[a, b, c]))?;
    let ac = f.marginalize(&union(&[a, c]))?;
    let bc = f.marginalize(&union(&[b, c]))?;
    let cc = f.marginalize(c)?;
    let mut full = vec![0usize; f.scope().iter().max().map_or(0, |m| m + 1)];
    let mut mi = 0.0;
    for_each_assignment(abc.cards(), |i, vals| {
        let p = abc.table()[i];
        if p <= 0.0 {
            return;
        }
        for (&v, &x) in abc.scope().iter().zip(vals) {
            full[v] = x;
        }
        let pc = if c.is_empty() { 1.0 } else { cc.at_net(&full) };
        mi += p * (p * pc / (ac.at_net(&full) * bc.at_net(&full))).ln();
    });
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginalize_and_condition_on_a_small_table() {
        let f = Factor::new(vec![3, 5], vec![2, 3], vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]).unwrap();
        let m = f.marginalize(&[5]).unwrap();
        assert_eq!(m.scope(), &[5]);
        for (got, want) in m.table().iter().zip([0.4, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
        let c = f.condition(&[(3, 1)]).unwrap();
        assert!((c.at(&[1, 0]) - 0.5).abs() < 1e-15);
        assert_eq!(c.at(&[0, 0]), 0.0);
    }

    #[test]
    fn zero_mass_condition_is_an_error() {
        let f = Factor::new(vec![0], vec![2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(f.condition(&[(0, 1)]), Err(ExactError::UndefinedConditional { .. })));
    }

    #[test]
    fn unknown_variable_is_reported() {
        let f = Factor::new(vec![0], vec![2], vec![0.5, 0.5]).unwrap();
        assert_eq!(f.marginalize(&[4]), Err(ExactError::NotInScope(4)));
    }

    #[test]
    fn mutual_information_of_copies_is_entropy() {
        let f = Factor::new(vec![0, 1], vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let mi = conditional_mutual_information(&f, &[0], &[1], &[]).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-12);
    }
}
