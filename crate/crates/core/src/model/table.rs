//! Dense probability tables over small discrete alphabets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of entries in any dense table (2^24).
pub const DENSE_BUDGET: usize = 1 << 24;

const PMF_SUM_TOL: f64 = 1e-10;

/// Per-variable cardinalities. Every size is at least 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Alphabet {
    sizes: Vec<usize>,
}

impl Alphabet {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if let Some((i, &s)) = sizes.iter().enumerate().find(|(_, &s)| s < 2) {
            return Err(Error::InvalidAlphabet(format!("variable {i} has size {s}, need >= 2")));
        }
        if let Some((i, _)) = sizes.iter().enumerate().find(|(_, &s)| s > u16::MAX as usize) {
            return Err(Error::InvalidAlphabet(format!("variable {i} exceeds 65535 symbols")));
        }
        Ok(Alphabet { sizes })
    }

    pub fn uniform(n: usize, size: usize) -> Result<Self> {
        Alphabet::new(vec![size; n])
    }

    pub fn binary(n: usize) -> Self {
        Alphabet { sizes: vec![2; n] }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn size(&self, var: usize) -> usize {
        self.sizes[var]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of joint configurations of `vars`, checked against the dense budget.
    pub fn configurations(&self, vars: &[usize]) -> Result<usize> {
        let sizes: Vec<usize> = vars
            .iter()
            .map(|&v| {
                self.sizes
                    .get(v)
                    .copied()
                    .ok_or(Error::VariableOutOfRange { index: v, n: self.sizes.len() })
            })
            .collect::<Result<_>>()?;
        checked_volume(&sizes)
    }

    /// Size of the full joint table.
    pub fn volume(&self) -> Result<usize> {
        checked_volume(&self.sizes)
    }
}

impl TryFrom<Vec<usize>> for Alphabet {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Alphabet::new(sizes)
    }
}

impl From<Alphabet> for Vec<usize> {
    fn from(a: Alphabet) -> Self {
        a.sizes
    }
}

pub(crate) fn checked_volume(sizes: &[usize]) -> Result<usize> {
    let required: u128 = sizes.iter().map(|&s| s as u128).product();
    if required > DENSE_BUDGET as u128 {
        return Err(Error::BudgetExceeded { required, budget: DENSE_BUDGET });
    }
    Ok(required as usize)
}

/// Exact probability mass function over the product of `sizes`, stored
/// row-major (the last variable varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    sizes: Vec<usize>,
    pmf: Vec<f64>,
}

impl JointTable {
    pub fn new(sizes: Vec<usize>, pmf: Vec<f64>) -> Result<Self> {
        let volume = checked_volume(&sizes)?;
        if pmf.len() != volume {
            return Err(Error::InvalidTable(format!(
                "expected {volume} entries, got {}",
                pmf.len()
            )));
        }
        if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidTable(format!("entry {p} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidTable(format!("entries sum to {total}")));
        }
        Ok(JointTable { sizes, pmf })
    }

    /// Table from nonnegative weights, normalized to sum to one.
    pub fn from_weights(sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidTable(format!("weights sum to {total}")));
        }
        JointTable::new(sizes, weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn from_parts_unchecked(sizes: Vec<usize>, pmf: Vec<f64>) -> Self {
        debug_assert_eq!(sizes.iter().product::<usize>(), pmf.len());
        JointTable { sizes, pmf }
    }

    pub fn uniform(sizes: Vec<usize>) -> Result<Self> {
        let volume = checked_volume(&sizes)?;
        Ok(JointTable { sizes, pmf: vec![1.0 / volume as f64; volume] })
    }

    pub fn point_mass(sizes: Vec<usize>, assignment: &[usize]) -> Result<Self> {
        let volume = checked_volume(&sizes)?;
        let mut pmf = vec![0.0; volume];
        let idx = encode(&sizes, assignment)?;
        pmf[idx] = 1.0;
        Ok(JointTable { sizes, pmf })
    }

    pub fn n_vars(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn prob(&self, assignment: &[usize]) -> Result<f64> {
        Ok(self.pmf[encode(&self.sizes, assignment)?])
    }

    pub fn index_of(&self, assignment: &[usize]) -> Result<usize> {
        encode(&self.sizes, assignment)
    }

    /// Assignment of flat index `idx`.
    pub fn assignment(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = idx % s;
            idx /= s;
        }
        out
    }

    /// Exact marginal over `subset`, variables laid out in the given order.
    pub fn marginal(&self, subset: &[usize]) -> Result<JointTable> {
        let n = self.sizes.len();
        let mut seen = vec![false; n];
        for &v in subset {
            if v >= n {
                return Err(Error::VariableOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::DuplicateVariable(v));
            }
        }
        let sub_sizes: Vec<usize> = subset.iter().map(|&v| self.sizes[v]).collect();
        let sub_volume = checked_volume(&sub_sizes)?;

        // Stride of each source variable inside the marginal (0 if summed out).
        let mut sub_stride = vec![0usize; n];
        let mut stride = 1;
        for &v in subset.iter().rev() {
            sub_stride[v] = stride;
            stride *= self.sizes[v];
        }

        let mut out = vec![0.0; sub_volume];
        let mut digits = vec![0usize; n];
        let mut sub_idx = 0usize;
        for &p in &self.pmf {
            out[sub_idx] += p;
            // odometer increment, last variable fastest
            for var in (0..n).rev() {
                digits[var] += 1;
                sub_idx += sub_stride[var];
                if digits[var] < self.sizes[var] {
                    break;
                }
                sub_idx -= sub_stride[var] * digits[var];
                digits[var] = 0;
            }
        }
        Ok(JointTable { sizes: sub_sizes, pmf: out })
    }

    /// Joint of two independent tables, `self`'s variables first.
    pub fn product(&self, other: &JointTable) -> Result<JointTable> {
        let sizes: Vec<usize> = self.sizes.iter().chain(&other.sizes).copied().collect();
        checked_volume(&sizes)?;
        let pmf = self
            .pmf
            .iter()
            .flat_map(|&p| other.pmf.iter().map(move |&q| p * q))
            .collect();
        Ok(JointTable { sizes, pmf })
    }
}

fn encode(sizes: &[usize], assignment: &[usize]) -> Result<usize> {
    if assignment.len() != sizes.len() {
        return Err(Error::InvalidTable(format!(
            "assignment has {} values for {} variables",
            assignment.len(),
            sizes.len()
        )));
    }
    let mut idx = 0;
    for (var, (&x, &s)) in assignment.iter().zip(sizes).enumerate() {
        if x >= s {
            return Err(Error::VariableOutOfRange { index: var, n: s });
        }
        idx = idx * s + x;
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_copy() -> JointTable {
        // X uniform, Z = X
        JointTable::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn alphabet_rejects_unary_variables() {
        assert!(Alphabet::new(vec![2, 1]).is_err());
        assert!(Alphabet::new(vec![2, 3]).is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let err = Alphabet::binary(25).volume().unwrap_err();
        match err {
            Error::BudgetExceeded { required, .. } => assert_eq!(required, 1 << 25),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(Alphabet::binary(24).volume().unwrap(), 1 << 24);
    }

    #[test]
    fn marginal_over_everything_is_identity() {
        let t = JointTable::from_weights(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.marginal(&[0, 1]).unwrap(), t);
    }

    #[test]
    fn marginal_over_nothing_is_scalar() {
        let m = chain_copy().marginal(&[]).unwrap();
        assert!(m.sizes().is_empty());
        assert_eq!(m.pmf(), &[1.0]);
    }

    #[test]
    fn marginal_of_copy_chain() {
        let m = chain_copy().marginal(&[1]).unwrap();
        assert_eq!(m.pmf(), &[0.5, 0.5]);
    }

    #[test]
    fn marginal_respects_requested_order() {
        let t = JointTable::from_weights(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let swapped = t.marginal(&[1, 0]).unwrap();
        assert_eq!(swapped.sizes(), &[3, 2]);
        for x in 0..2 {
            for y in 0..3 {
                assert_eq!(swapped.prob(&[y, x]).unwrap(), t.prob(&[x, y]).unwrap());
            }
        }
    }

    #[test]
    fn marginal_errors() {
        let t = chain_copy();
        assert!(matches!(t.marginal(&[2]), Err(Error::VariableOutOfRange { .. })));
        assert!(matches!(t.marginal(&[0, 0]), Err(Error::DuplicateVariable(0))));
    }

    #[test]
    fn rejects_bad_pmf() {
        assert!(JointTable::new(vec![2], vec![0.5, 0.4]).is_err());
        assert!(JointTable::new(vec![2], vec![1.5, -0.5]).is_err());
        assert!(JointTable::new(vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn assignment_roundtrip() {
        let t = JointTable::uniform(vec![2, 3, 4]).unwrap();
        for idx in 0..t.len() {
            assert_eq!(t.index_of(&t.assignment(idx)).unwrap(), idx);
        }
    }
}
