//! Forward sampling and plug-in estimators.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::info::{canonical_sets, conditional_mutual_information, CmiSource};
use crate::model::table::{checked_volume, Alphabet, JointTable};
use crate::model::DiscreteBayesNet;
use crate::rng::RngSeed;

/// `m` samples over `n` discrete variables, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    alphabet: Alphabet,
    m: usize,
    values: Vec<u16>,
}

impl Dataset {
    pub fn from_rows(alphabet: Alphabet, rows: &[Vec<usize>]) -> Result<Self> {
        let n = alphabet.len();
        let mut values = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTable(format!("row {i} has {} values, need {n}", row.len())));
            }
            for (var, &x) in row.iter().enumerate() {
                if x >= alphabet.size(var) {
                    return Err(Error::InvalidTable(format!(
                        "row {i}: value {x} outside alphabet of variable {var}"
                    )));
                }
                values.push(x as u16);
            }
        }
        Ok(Dataset { alphabet, m: rows.len(), values })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n(&self) -> usize {
        self.alphabet.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[u16] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> {
        self.values.chunks(self.n().max(1)).take(self.m)
    }

    /// Raw counts over `subset` (row-major in the given order).
    pub fn counts(&self, subset: &[usize]) -> Result<Vec<u64>> {
        let n = self.n();
        let mut seen = vec![false; n];
        for &v in subset {
            if v >= n {
                return Err(Error::VariableOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::DuplicateVariable(v));
            }
        }
        let volume = self.alphabet.configurations(subset)?;
        let mut counts = vec![0u64; volume];
        for row in self.rows() {
            let idx = subset
                .iter()
                .fold(0usize, |acc, &v| acc * self.alphabet.size(v) + row[v] as usize);
            counts[idx] += 1;
        }
        Ok(counts)
    }

    /// Relative frequencies over `subset`.
    pub fn empirical_joint(&self, subset: &[usize]) -> Result<JointTable> {
        if self.m == 0 {
            return Err(Error::EmptyDataset);
        }
        let counts = self.counts(subset)?;
        let sizes = subset.iter().map(|&v| self.alphabet.size(v)).collect();
        let m = self.m as f64;
        Ok(JointTable::from_parts_unchecked(sizes, counts.into_iter().map(|c| c as f64 / m).collect()))
    }

    /// CSV with header `v0,...,v{n-1}` and one sample per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..self.n()).map(|v| format!("v{v}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(u16::to_string))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl CmiSource for Dataset {
    fn n_vars(&self) -> usize {
        self.n()
    }

    fn cmi(&self, a: &[usize], b: &[usize], z: &[usize]) -> Result<f64> {
        empirical_cmi(self, a, b, z)
    }
}

/// Plug-in estimate of `I(a; b | z)`: the exact CMI of the empirical joint
/// over `a ∪ b ∪ z`.
pub fn empirical_cmi(data: &Dataset, a: &[usize], b: &[usize], z: &[usize]) -> Result<f64> {
    let (a, b, z) = canonical_sets(data.n(), a, b, z)?;
    let order: Vec<usize> = a.iter().chain(&b).chain(&z).copied().collect();
    let joint = data.empirical_joint(&order)?;
    let (na, nb) = (a.len(), b.len());
    let idx = |r: std::ops::Range<usize>| r.collect::<Vec<_>>();
    conditional_mutual_information(&joint, &idx(0..na), &idx(na..na + nb), &idx(na + nb..order.len()))
}

/// Draws `m` i.i.d. rows in topological order of the network.
pub fn forward_sample(bn: &DiscreteBayesNet, m: usize, seed: RngSeed) -> Result<Dataset> {
    let n = bn.n();
    let order = bn.graph().topological_order();
    let cumulative: Vec<Vec<Vec<f64>>> = bn
        .cpts()
        .iter()
        .map(|cpt| {
            cpt.table
                .iter()
                .map(|row| {
                    row.iter()
                        .scan(0.0, |acc, &p| {
                            *acc += p;
                            Some(*acc)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut rng = seed.rng();
    let mut values = vec![0u16; m * n];
    let mut row = vec![0usize; n];
    for i in 0..m {
        for &v in &order {
            let cfg = bn.parent_config(v, &row);
            let cdf = &cumulative[v][cfg];
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let x = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            row[v] = x;
        }
        for (slot, &x) in values[i * n..(i + 1) * n].iter_mut().zip(&row) {
            *slot = x as u16;
        }
    }
    Ok(Dataset { alphabet: bn.alphabet().clone(), m, values })
}

/// Empirical distribution of `m` i.i.d. draws from `joint`, generated as
/// multinomial counts (sequential binomials) without materializing rows.
pub fn sample_multinomial(joint: &JointTable, m: u64, seed: RngSeed) -> Result<JointTable> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    checked_volume(joint.sizes())?;
    let mut rng = seed.rng();
    let mut remaining_n = m;
    let mut remaining_p = 1.0f64;
    let mut freq = Vec::with_capacity(joint.len());
    for &p in joint.pmf() {
        let k = if remaining_n == 0 || p <= 0.0 {
            0
        } else if p >= remaining_p {
            remaining_n
        } else {
            let q = (p / remaining_p).clamp(0.0, 1.0);
            Binomial::new(remaining_n, q)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        };
        remaining_n -= k;
        remaining_p -= p;
        freq.push(k as f64 / m as f64);
    }
    if remaining_n > 0 {
        // floating residue: hand leftovers to the last positive cell
        if let Some(i) = joint.pmf().iter().rposition(|&p| p > 0.0) {
            freq[i] += remaining_n as f64 / m as f64;
        }
    }
    Ok(JointTable::from_parts_unchecked(joint.sizes().to_vec(), freq))
}
