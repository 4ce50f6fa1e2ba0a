//! Discrete Bayesian networks over polytrees, their joints, and projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::graph::PolytreeGraph;
use crate::model::info::mutual_information;
use crate::model::table::{checked_volume, Alphabet, JointTable};

const ROW_SUM_TOL: f64 = 1e-12;

/// Conditional table `P(node = x | parents = a)`. Rows are parent
/// configurations, row-major over `parents` in ascending order; columns are
/// the node's values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: usize,
    pub parents: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    /// First row whose entries do not form a distribution, with its sum.
    pub fn row_violation(&self) -> Option<(usize, f64)> {
        self.table.iter().enumerate().find_map(|(i, row)| {
            let sum: f64 = row.iter().sum();
            let bad_entry = row.iter().any(|p| !(0.0..=1.0).contains(p));
            (bad_entry || (sum - 1.0).abs() > ROW_SUM_TOL).then_some((i, sum))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteBayesNet {
    graph: PolytreeGraph,
    alphabet: Alphabet,
    cpts: Vec<Cpt>,
}

impl DiscreteBayesNet {
    /// `cpts[v]` must describe node `v` with exactly its graph parents.
    pub fn new(graph: PolytreeGraph, alphabet: Alphabet, cpts: Vec<Cpt>) -> Result<Self> {
        if alphabet.len() != graph.n() {
            return Err(Error::InvalidGraph(format!(
                "graph has {} vertices, alphabet {}",
                graph.n(),
                alphabet.len()
            )));
        }
        if cpts.len() != graph.n() {
            return Err(Error::InvalidGraph(format!("{} CPTs for {} vertices", cpts.len(), graph.n())));
        }
        for (v, cpt) in cpts.iter().enumerate() {
            let fail = |reason: String| Error::InvalidCpt { node: v, reason };
            if cpt.node != v {
                return Err(fail(format!("listed as node {}", cpt.node)));
            }
            if cpt.parents != graph.parents(v) {
                return Err(fail(format!(
                    "parents {:?} differ from graph parents {:?}",
                    cpt.parents,
                    graph.parents(v)
                )));
            }
            let rows = alphabet.configurations(&cpt.parents)?;
            if cpt.table.len() != rows {
                return Err(fail(format!("{} rows, expected {rows}", cpt.table.len())));
            }
            if let Some(row) = cpt.table.iter().find(|r| r.len() != alphabet.size(v)) {
                return Err(fail(format!("row of width {}, expected {}", row.len(), alphabet.size(v))));
            }
            if let Some((row, sum)) = cpt.row_violation() {
                return Err(fail(format!("row {row} sums to {sum}")));
            }
        }
        Ok(DiscreteBayesNet { graph, alphabet, cpts })
    }

    pub fn graph(&self) -> &PolytreeGraph {
        &self.graph
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, v: usize) -> &Cpt {
        &self.cpts[v]
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Row index of the parent configuration of `v` under a full assignment.
    pub fn parent_config(&self, v: usize, assignment: &[usize]) -> usize {
        self.cpts[v]
            .parents
            .iter()
            .fold(0, |acc, &p| acc * self.alphabet.size(p) + assignment[p])
    }

    /// Dense joint `P(x) = prod_v P(x_v | x_parents(v))`.
    pub fn joint_distribution(&self) -> Result<JointTable> {
        let sizes = self.alphabet.sizes().to_vec();
        let volume = checked_volume(&sizes)?;
        let n = sizes.len();
        let mut pmf = Vec::with_capacity(volume);
        let mut digits = vec![0usize; n];
        for _ in 0..volume {
            let p: f64 = (0..n)
                .map(|v| self.cpts[v].table[self.parent_config(v, &digits)][digits[v]])
                .product();
            pmf.push(p);
            for var in (0..n).rev() {
                digits[var] += 1;
                if digits[var] < sizes[var] {
                    break;
                }
                digits[var] = 0;
            }
        }
        Ok(JointTable::from_parts_unchecked(sizes, pmf))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelJson>(text)?.try_into()
    }
}

/// Wire format for [`DiscreteBayesNet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub n: usize,
    pub alphabet: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub cpts: Vec<Cpt>,
}

impl From<&DiscreteBayesNet> for ModelJson {
    fn from(bn: &DiscreteBayesNet) -> Self {
        ModelJson {
            n: bn.n(),
            alphabet: bn.alphabet.sizes().to_vec(),
            edges: bn.graph.edges().iter().map(|&(u, v)| [u, v]).collect(),
            cpts: bn.cpts.clone(),
        }
    }
}

impl TryFrom<ModelJson> for DiscreteBayesNet {
    type Error = Error;

    fn try_from(m: ModelJson) -> Result<Self> {
        let graph = PolytreeGraph::new(m.n, m.edges.iter().map(|e| (e[0], e[1])))?;
        let mut cpts = m.cpts;
        cpts.sort_by_key(|c| c.node);
        DiscreteBayesNet::new(graph, Alphabet::new(m.alphabet)?, cpts)
    }
}

/// Projection of `p` onto `g`: each node gets `P(v | parents_g(v))`. Parent
/// configurations with zero probability get uniform rows.
pub fn project_onto(p: &JointTable, g: &PolytreeGraph) -> Result<DiscreteBayesNet> {
    if p.n_vars() != g.n() {
        return Err(Error::InvalidGraph(format!(
            "graph has {} vertices, distribution {}",
            g.n(),
            p.n_vars()
        )));
    }
    let alphabet = Alphabet::new(p.sizes().to_vec())?;
    let mut cpts = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let parents = g.parents(v).to_vec();
        let mut vars = parents.clone();
        vars.push(v);
        let family = p.marginal(&vars)?;
        let width = alphabet.size(v);
        let table = family
            .pmf()
            .chunks(width)
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter().map(|x| x / total).collect()
                } else {
                    vec![1.0 / width as f64; width]
                }
            })
            .collect();
        cpts.push(Cpt { node: v, parents, table });
    }
    DiscreteBayesNet::new(g.clone(), alphabet, cpts)
}

/// `sum_v I(v; parents_g(v))` under `p`, in bits.
pub fn mi_score(p: &JointTable, g: &PolytreeGraph) -> Result<f64> {
    (0..g.n())
        .filter(|&v| !g.parents(v).is_empty())
        .map(|v| mutual_information(p, &[v], g.parents(v)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::info::kl_divergence;
    use approx::assert_abs_diff_eq;

    fn copy_chain(k: usize) -> DiscreteBayesNet {
        let edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        let graph = PolytreeGraph::new(k, edges).unwrap();
        let cpts = (0..k)
            .map(|v| Cpt {
                node: v,
                parents: graph.parents(v).to_vec(),
                table: if v == 0 {
                    vec![vec![0.5, 0.5]]
                } else {
                    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
                },
            })
            .collect();
        DiscreteBayesNet::new(graph, Alphabet::binary(k), cpts).unwrap()
    }

    #[test]
    fn single_node_joint() {
        let bn = DiscreteBayesNet::new(
            PolytreeGraph::empty(1),
            Alphabet::binary(1),
            vec![Cpt { node: 0, parents: vec![], table: vec![vec![0.3, 0.7]] }],
        )
        .unwrap();
        assert_eq!(bn.joint_distribution().unwrap().pmf(), &[0.3, 0.7]);
    }

    #[test]
    fn copy_chain_joint() {
        let joint = copy_chain(2).joint_distribution().unwrap();
        assert_eq!(joint.pmf(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn cpt_validation() {
        let graph = PolytreeGraph::new(2, [(0, 1)]).unwrap();
        let bad = vec![
            Cpt { node: 0, parents: vec![], table: vec![vec![0.5, 0.5]] },
            Cpt { node: 1, parents: vec![0], table: vec![vec![0.5, 0.4], vec![0.5, 0.5]] },
        ];
        assert!(matches!(
            DiscreteBayesNet::new(graph.clone(), Alphabet::binary(2), bad),
            Err(Error::InvalidCpt { node: 1, .. })
        ));
        let wrong_parents = vec![
            Cpt { node: 0, parents: vec![], table: vec![vec![0.5, 0.5]] },
            Cpt { node: 1, parents: vec![], table: vec![vec![0.5, 0.5]] },
        ];
        assert!(DiscreteBayesNet::new(graph, Alphabet::binary(2), wrong_parents).is_err());
    }

    #[test]
    fn joint_budget_error_names_size() {
        let n = 25;
        let graph = PolytreeGraph::empty(n);
        let cpts = (0..n).map(|v| Cpt { node: v, parents: vec![], table: vec![vec![0.5, 0.5]] }).collect();
        let bn = DiscreteBayesNet::new(graph, Alphabet::binary(n), cpts).unwrap();
        let err = bn.joint_distribution().unwrap_err();
        assert!(err.to_string().contains("33554432"), "{err}");
    }

    #[test]
    fn mi_score_of_copy_chain() {
        for k in 1..6 {
            let bn = copy_chain(k);
            let joint = bn.joint_distribution().unwrap();
            assert_abs_diff_eq!(mi_score(&joint, bn.graph()).unwrap(), (k - 1) as f64, epsilon = 1e-12);
            assert_eq!(mi_score(&joint, &PolytreeGraph::empty(k)).unwrap(), 0.0);
        }
    }

    #[test]
    fn projection_onto_generator_is_lossless() {
        let bn = copy_chain(4);
        let joint = bn.joint_distribution().unwrap();
        let proj = project_onto(&joint, bn.graph()).unwrap();
        let kl = kl_divergence(&joint, &proj.joint_distribution().unwrap()).unwrap();
        assert_abs_diff_eq!(kl, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_probability_rows_become_uniform() {
        // Z = X, X always 0: parent config X=1 never occurs.
        let joint = JointTable::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = PolytreeGraph::new(2, [(0, 1)]).unwrap();
        let proj = project_onto(&joint, &g).unwrap();
        assert_eq!(proj.cpt(1).table[1], vec![0.5, 0.5]);
        assert_eq!(proj.cpt(1).table[0], vec![1.0, 0.0]);
    }

    #[test]
    fn json_roundtrip_is_byte_stable() {
        let bn = copy_chain(3);
        let text = bn.to_json().unwrap();
        let back = DiscreteBayesNet::from_json(&text).unwrap();
        assert_eq!(back, bn);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn json_rejects_corrupted_row() {
        let bn = copy_chain(2);
        let mut m = ModelJson::from(&bn);
        m.cpts[0].table[0] = vec![0.5, 0.4];
        let text = serde_json::to_string(&m).unwrap();
        assert!(DiscreteBayesNet::from_json(&text).is_err());
    }
}
