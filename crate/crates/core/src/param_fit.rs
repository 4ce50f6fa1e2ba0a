//! Add-κ conditional probability estimates for a fixed graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cpt, DiscreteBayesNet, PolytreeGraph};
use crate::sampling::Dataset;

/// Pseudo-count added to every cell. `kappa = 1` is Laplace smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRule {
    pub kappa: f64,
}

impl SmoothingRule {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be >= 0")));
        }
        Ok(SmoothingRule { kappa })
    }

    pub fn laplace() -> Self {
        SmoothingRule { kappa: 1.0 }
    }

    pub fn maximum_likelihood() -> Self {
        SmoothingRule { kappa: 0.0 }
    }
}

impl Default for SmoothingRule {
    fn default() -> Self {
        SmoothingRule::laplace()
    }
}

/// `P(v = x | pa = a) = (count(x, a) + κ) / (count(a) + κ |Σ_v|)`, with
/// uniform rows for parent configurations that have no weight at all.
pub fn fit_cpts(data: &Dataset, g: &PolytreeGraph, rule: SmoothingRule) -> Result<DiscreteBayesNet> {
    if data.n() != g.n() {
        return Err(Error::InvalidGraph(format!("graph has {} vertices, data {}", g.n(), data.n())));
    }
    if data.m() == 0 {
        return Err(Error::EmptyDataset);
    }
    let alphabet = data.alphabet().clone();
    let cpts = (0..g.n())
        .map(|v| {
            let parents = g.parents(v).to_vec();
            let mut family = parents.clone();
            family.push(v);
            let counts = data.counts(&family)?;
            let width = alphabet.size(v);
            let table = counts
                .chunks(width)
                .map(|row| {
                    let total = row.iter().sum::<u64>() as f64 + rule.kappa * width as f64;
                    if total > 0.0 {
                        row.iter().map(|&c| (c as f64 + rule.kappa) / total).collect()
                    } else {
                        vec![1.0 / width as f64; width]
                    }
                })
                .collect();
            Ok(Cpt { node: v, parents, table })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteBayesNet::new(g.clone(), alphabet, cpts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{project_onto, Alphabet};

    #[test]
    fn exact_copy_with_mle() {
        let rows: Vec<Vec<usize>> = (0..20).map(|i| vec![i % 2, i % 2]).collect();
        let data = Dataset::from_rows(Alphabet::binary(2), &rows).unwrap();
        let g = PolytreeGraph::new(2, [(0, 1)]).unwrap();
        let bn = fit_cpts(&data, &g, SmoothingRule::maximum_likelihood()).unwrap();
        assert_eq!(bn.cpt(1).table, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(bn.cpt(0).table, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn unseen_row_with_laplace_is_uniform() {
        let rows = vec![vec![0, 1]; 7];
        let data = Dataset::from_rows(Alphabet::binary(2), &rows).unwrap();
        let g = PolytreeGraph::new(2, [(0, 1)]).unwrap();
        let bn = fit_cpts(&data, &g, SmoothingRule::laplace()).unwrap();
        assert_eq!(bn.cpt(1).table[1], vec![0.5, 0.5]);
        assert_eq!(bn.cpt(1).table[0], vec![1.0 / 9.0, 8.0 / 9.0]);
        let mle = fit_cpts(&data, &g, SmoothingRule::maximum_likelihood()).unwrap();
        assert_eq!(mle.cpt(1).table[1], vec![0.5, 0.5]);
    }

    #[test]
    fn mle_reproduces_plugin_conditionals() {
        let rows: Vec<Vec<usize>> = (0..37).map(|i| vec![i % 3, (i / 2) % 2, (i * 7) % 3]).collect();
        let alphabet = Alphabet::new(vec![3, 2, 3]).unwrap();
        let data = Dataset::from_rows(alphabet, &rows).unwrap();
        let g = PolytreeGraph::new(3, [(0, 1), (2, 1)]).unwrap();
        let fitted = fit_cpts(&data, &g, SmoothingRule::maximum_likelihood()).unwrap();
        let projected = project_onto(&data.empirical_joint(&[0, 1, 2]).unwrap(), &g).unwrap();
        for v in 0..3 {
            for (a, b) in fitted.cpt(v).table.iter().zip(&projected.cpt(v).table) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn negative_kappa_rejected() {
        assert!(SmoothingRule::new(-0.5).is_err());
        assert!(SmoothingRule::new(f64::NAN).is_err());
    }
}
