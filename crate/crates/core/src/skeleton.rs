//! Chow-Liu skeleton recovery and the edge-gap condition that makes it
//! succeed from finite samples.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::graph::DisjointSets;
use crate::model::info::CmiSource;
use crate::model::{JointTable, PolytreeGraph, Skeleton};

/// Symmetric matrix of pairwise mutual information, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct MiMatrix {
    n: usize,
    values: Vec<f64>,
}

impl MiMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for u in 0..n {
            for v in u + 1..n {
                let x = f(u, v);
                values[u * n + v] = x;
                values[v * n + u] = x;
            }
        }
        MiMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.n + v]
    }
}

/// `I(u; v)` for every pair, exact or plug-in depending on the source.
pub fn pairwise_mi<S: CmiSource + ?Sized>(source: &S) -> Result<MiMatrix> {
    let n = source.n_vars();
    let mut values = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let x = source.mi(&[u], &[v])?;
            values[u * n + v] = x;
            values[v * n + u] = x;
        }
    }
    Ok(MiMatrix { n, values })
}

/// Maximum-weight spanning forest by Kruskal: descending weight, ties broken
/// by the lexicographically smaller `(u, v)`. With `prune_below`, pairs whose
/// weight is below the cutoff are never added.
pub fn chow_liu_skeleton(mi: &MiMatrix, prune_below: Option<f64>) -> Skeleton {
    let n = mi.n();
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| prune_below.is_none_or(|cut| mi.get(u, v) >= cut))
        .collect();
    candidates.sort_by(|&(a, b), &(c, d)| mi.get(c, d).total_cmp(&mi.get(a, b)).then((a, b).cmp(&(c, d))));
    let mut dsu = DisjointSets::new(n);
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    for (u, v) in candidates {
        if dsu.union(u, v) {
            chosen.push((u, v));
            if chosen.len() + 1 == n {
                break;
            }
        }
    }
    Skeleton::new(n, chosen).expect("Kruskal output is a forest")
}

/// Where the gap condition is tightest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GapWitness {
    /// A true edge with too little mutual information.
    WeakEdge { a: usize, b: usize, edge_mi: f64 },
    /// A non-adjacent pair whose mutual information is not below that of an
    /// edge on the path joining them.
    PathPair { u: usize, v: usize, pair_mi: f64, a: usize, b: usize, edge_mi: f64 },
}

/// Largest gap `eps_p` such that every true edge carries at least `eps_p`
/// bits and every non-adjacent connected pair sits at least `eps_p` below
/// each edge on its path. `eps_p` is `+inf` for edgeless graphs and 0 when
/// violated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub epsilon_p: f64,
    pub satisfied: bool,
    pub witness: Option<GapWitness>,
    /// Tightest constraint, reported even when satisfied.
    pub binding: Option<GapWitness>,
}

const GAP_TOL: f64 = 1e-12;

/// Evaluates the Chow-Liu gap condition on the exact joint.
pub fn check_assumption(joint: &JointTable, g_star: &PolytreeGraph) -> Result<GapReport> {
    let skeleton = g_star.skeleton();
    let n = g_star.n();
    if joint.n_vars() != n {
        return Err(crate::Error::InvalidGraph(format!(
            "graph has {n} vertices, distribution {}",
            joint.n_vars()
        )));
    }
    let pair_mi = pairwise_mi(joint)?;

    let mut best = f64::INFINITY;
    let mut binding = None;
    for &(a, b) in skeleton.edges() {
        let e = pair_mi.get(a, b);
        if e < best {
            best = e;
            binding = Some(GapWitness::WeakEdge { a, b, edge_mi: e });
        }
    }
    for u in 0..n {
        for v in u + 1..n {
            if skeleton.has_edge(u, v) {
                continue;
            }
            let Some(path) = skeleton.path(u, v) else { continue };
            let p = pair_mi.get(u, v);
            for w in path.windows(2) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                let e = pair_mi.get(a, b);
                if e - p < best {
                    best = e - p;
                    binding = Some(GapWitness::PathPair { u, v, pair_mi: p, a, b, edge_mi: e });
                }
            }
        }
    }
    let satisfied = best > GAP_TOL;
    Ok(GapReport {
        epsilon_p: if satisfied { best } else { 0.0 },
        satisfied,
        witness: if satisfied { None } else { binding.clone() },
        binding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, Cpt, DiscreteBayesNet};

    fn bsc_chain(n: usize, flip: f64) -> DiscreteBayesNet {
        let g = PolytreeGraph::new(n, (1..n).map(|i| (i - 1, i))).unwrap();
        let cpts = (0..n)
            .map(|v| Cpt {
                node: v,
                parents: g.parents(v).to_vec(),
                table: if v == 0 {
                    vec![vec![0.5, 0.5]]
                } else {
                    vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]]
                },
            })
            .collect();
        DiscreteBayesNet::new(g, Alphabet::binary(n), cpts).unwrap()
    }

    fn h(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn independent_product_has_zero_mi() {
        let t = JointTable::uniform(vec![2, 3, 2]).unwrap();
        let mi = pairwise_mi(&t).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                assert!(mi.get(u, v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn copy_pair_has_one_bit() {
        let t = JointTable::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((pairwise_mi(&t).unwrap().get(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_chain_from_exact_mi() {
        let bn = bsc_chain(5, 0.1);
        let joint = bn.joint_distribution().unwrap();
        let skel = chow_liu_skeleton(&pairwise_mi(&joint).unwrap(), None);
        assert_eq!(skel, bn.graph().skeleton());
    }

    #[test]
    fn two_vertices() {
        let m = MiMatrix::from_fn(2, |_, _| 0.3);
        assert_eq!(chow_liu_skeleton(&m, None).edges(), &[(0, 1)]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let m = MiMatrix::from_fn(3, |_, _| 0.5);
        assert_eq!(chow_liu_skeleton(&m, None).edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn pruning_keeps_components_apart() {
        // two independent copies of a 2-chain: {0,1} and {2,3}
        let pair = bsc_chain(2, 0.1).joint_distribution().unwrap();
        let joint = pair.product(&pair).unwrap();
        let eps_p = 1.0 - h(0.1);
        let mi = pairwise_mi(&joint).unwrap();
        let pruned = chow_liu_skeleton(&mi, Some(eps_p / 2.0));
        assert_eq!(pruned.edges(), &[(0, 1), (2, 3)]);
        // without pruning a spanning tree adds one cross edge last
        assert_eq!(chow_liu_skeleton(&mi, None).edges().len(), 3);
    }

    #[test]
    fn deterministic_copy_chain_violates_gap() {
        let bn = bsc_chain(3, 0.0);
        let report = check_assumption(&bn.joint_distribution().unwrap(), bn.graph()).unwrap();
        assert!(!report.satisfied);
        assert_eq!(report.epsilon_p, 0.0);
        assert!(matches!(report.witness, Some(GapWitness::PathPair { u: 0, v: 2, .. })));
    }

    #[test]
    fn noisy_chain_gap_matches_enumeration() {
        // independent closed forms: edge MI 1 - h(f); two-hop MI 1 - h(2f(1-f))
        let f = 0.2;
        let bn = bsc_chain(3, f);
        let report = check_assumption(&bn.joint_distribution().unwrap(), bn.graph()).unwrap();
        let edge = 1.0 - h(f);
        let two_hop = 1.0 - h(2.0 * f * (1.0 - f));
        let expected = edge.min(edge - two_hop);
        assert!(report.satisfied);
        assert!((report.epsilon_p - expected).abs() < 1e-12, "{} vs {expected}", report.epsilon_p);
    }

    #[test]
    fn edgeless_graph_is_vacuous() {
        let t = JointTable::uniform(vec![2, 2]).unwrap();
        let report = check_assumption(&t, &PolytreeGraph::empty(2)).unwrap();
        assert!(report.satisfied);
        assert_eq!(report.epsilon_p, f64::INFINITY);
        assert!(report.witness.is_none());
    }
}
