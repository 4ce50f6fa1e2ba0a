//! Entropy, (conditional) mutual information and divergences, all in bits.
//!
//! Conventions: `0 log 0 = 0`, and a KL term with `P(x) > 0 = Q(x)` yields
//! `f64::INFINITY` rather than a floating-point exception.

use crate::error::{Error, Result};
use crate::model::table::JointTable;

/// Anything that can report (conditional) mutual information between
/// variable sets: exact tables or empirical data.
pub trait CmiSource {
    fn n_vars(&self) -> usize;

    /// `I(a; b | z)` in bits.
    fn cmi(&self, a: &[usize], b: &[usize], z: &[usize]) -> Result<f64>;

    fn mi(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.cmi(a, b, &[])
    }
}

impl CmiSource for JointTable {
    fn n_vars(&self) -> usize {
        JointTable::n_vars(self)
    }

    fn cmi(&self, a: &[usize], b: &[usize], z: &[usize]) -> Result<f64> {
        conditional_mutual_information(self, a, b, z)
    }
}

pub fn entropy(table: &JointTable) -> f64 {
    -table
        .pmf()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

pub fn mutual_information(joint: &JointTable, a: &[usize], b: &[usize]) -> Result<f64> {
    conditional_mutual_information(joint, a, b, &[])
}

/// Sorted copies of the three sets, checked for range, duplicates, overlap
/// and emptiness of `a` and `b`.
pub(crate) fn canonical_sets(
    n: usize,
    a: &[usize],
    b: &[usize],
    z: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut owner = vec![usize::MAX; n];
    for (tag, set) in [a, b, z].into_iter().enumerate() {
        for &v in set {
            if v >= n {
                return Err(Error::VariableOutOfRange { index: v, n });
            }
            match owner[v] {
                usize::MAX => owner[v] = tag,
                t if t == tag => return Err(Error::DuplicateVariable(v)),
                _ => return Err(Error::OverlappingSets(v)),
            }
        }
    }
    let sorted = |s: &[usize]| {
        let mut s = s.to_vec();
        s.sort_unstable();
        s
    };
    Ok((sorted(a), sorted(b), sorted(z)))
}

pub fn conditional_mutual_information(
    joint: &JointTable,
    a: &[usize],
    b: &[usize],
    z: &[usize],
) -> Result<f64> {
    let (a, b, z) = canonical_sets(joint.n_vars(), a, b, z)?;
    let order: Vec<usize> = a.iter().chain(&b).chain(&z).copied().collect();
    let marg = joint.marginal(&order)?;
    let size_of = |set: &[usize]| set.iter().map(|&v| joint.sizes()[v]).product::<usize>();
    Ok(cmi_of_blocks(marg.pmf(), size_of(&a), size_of(&b), size_of(&z)))
}

/// CMI of a table laid out as `[a-block][b-block][z-block]`.
pub(crate) fn cmi_of_blocks(p: &[f64], sa: usize, sb: usize, sz: usize) -> f64 {
    debug_assert_eq!(p.len(), sa * sb * sz);
    let mut pz = vec![0.0; sz];
    let mut paz = vec![0.0; sa * sz];
    let mut pbz = vec![0.0; sb * sz];
    for ia in 0..sa {
        for ib in 0..sb {
            for iz in 0..sz {
                let q = p[(ia * sb + ib) * sz + iz];
                pz[iz] += q;
                paz[ia * sz + iz] += q;
                pbz[ib * sz + iz] += q;
            }
        }
    }
    let mut total = 0.0;
    for ia in 0..sa {
        for ib in 0..sb {
            for iz in 0..sz {
                let q = p[(ia * sb + ib) * sz + iz];
                if q > 0.0 {
                    total += q * ((q * pz[iz]) / (paz[ia * sz + iz] * pbz[ib * sz + iz])).log2();
                }
            }
        }
    }
    total
}

fn same_alphabet(p: &JointTable, q: &JointTable) -> Result<()> {
    if p.sizes() != q.sizes() {
        return Err(Error::AlphabetMismatch { left: p.sizes().to_vec(), right: q.sizes().to_vec() });
    }
    Ok(())
}

/// `KL(P || Q)` in bits; `f64::INFINITY` when `P` puts mass where `Q` has none.
pub fn kl_divergence(p: &JointTable, q: &JointTable) -> Result<f64> {
    same_alphabet(p, q)?;
    let mut total = 0.0;
    for (&pp, &qq) in p.pmf().iter().zip(q.pmf()) {
        if pp > 0.0 {
            if qq <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += pp * (pp / qq).log2();
        }
    }
    Ok(total)
}

/// Squared Hellinger distance `1 - sum sqrt(P Q)`, clamped to `[0, 1]`.
pub fn hellinger_squared(p: &JointTable, q: &JointTable) -> Result<f64> {
    same_alphabet(p, q)?;
    let affinity: f64 = p.pmf().iter().zip(q.pmf()).map(|(&a, &b)| (a * b).sqrt()).sum();
    Ok((1.0 - affinity).clamp(0.0, 1.0))
}
