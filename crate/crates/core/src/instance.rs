//! Random problem instances and the ten-vertex example polytree.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{entropy, mutual_information, Alphabet, Cpt, DiscreteBayesNet, JointTable, PolytreeGraph, Skeleton};
use crate::rng::RngSeed;

/// Attempts allowed when resampling CPTs to meet `min_edge_mi`.
pub const RESAMPLE_ATTEMPTS: usize = 1000;

const LOW_ENTROPY_BITS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub alphabet_size: usize,
    pub cpt_concentration: f64,
    /// Every true edge must carry at least this much mutual information (bits).
    pub min_edge_mi: Option<f64>,
    /// Probability of deleting each spanning-tree edge, turning the tree into a forest.
    pub edge_drop: f64,
    pub seed: RngSeed,
}

impl InstanceSpec {
    pub fn new(n: usize, d: usize, seed: RngSeed) -> Self {
        InstanceSpec {
            n,
            d,
            alphabet_size: 2,
            cpt_concentration: 1.0,
            min_edge_mi: None,
            edge_drop: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("in-degree bound must be at least 1".into()));
        }
        if self.alphabet_size < 2 || self.alphabet_size > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("alphabet size {} out of range", self.alphabet_size)));
        }
        if !(self.cpt_concentration.is_finite() && self.cpt_concentration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "concentration {} must be positive",
                self.cpt_concentration
            )));
        }
        if !(0.0..=1.0).contains(&self.edge_drop) {
            return Err(Error::InvalidParameter(format!("edge drop {} must lie in [0, 1]", self.edge_drop)));
        }
        if let Some(t) = self.min_edge_mi {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParameter(format!("min edge MI {t} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Uniform random labelled tree on `n` vertices, decoded from a Prüfer sequence.
pub fn random_tree(n: usize, rng: &mut ChaCha20Rng) -> Skeleton {
    if n < 2 {
        return Skeleton::empty(n);
    }
    if n == 2 {
        return Skeleton::new(2, [(0, 1)]).expect("single edge");
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf, c));
        degree[leaf] -= 1;
        degree[c] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    Skeleton::new(n, edges).expect("Prüfer decoding yields a tree")
}

/// Roots each component at a random vertex, orients away from it, then flips
/// a random subset of edges wherever the new head stays within `d` parents.
pub fn random_orientation(skeleton: &Skeleton, d: usize, rng: &mut ChaCha20Rng) -> PolytreeGraph {
    let n = skeleton.n();
    let labels = skeleton.components();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        members[labels[v]].push(v);
    }
    let mut arcs = Vec::with_capacity(skeleton.edges().len());
    let mut seen = vec![false; n];
    for comp in members.iter().filter(|c| !c.is_empty()) {
        let root = comp[rng.random_range(0..comp.len())];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            for &w in skeleton.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    arcs.push((u, w));
                    stack.push(w);
                }
            }
        }
    }
    let mut in_deg = vec![0usize; n];
    for &(_, v) in &arcs {
        in_deg[v] += 1;
    }
    let mut order: Vec<usize> = (0..arcs.len()).collect();
    order.shuffle(rng);
    for i in order {
        if !rng.random_bool(0.5) {
            continue;
        }
        let (u, v) = arcs[i];
        if in_deg[u] < d {
            in_deg[u] += 1;
            in_deg[v] -= 1;
            arcs[i] = (v, u);
        }
    }
    PolytreeGraph::new(n, arcs).expect("orienting a forest yields a polytree")
}

fn dirichlet_row(width: usize, gamma: &Gamma<f64>, rng: &mut ChaCha20Rng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..width).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

fn random_cpt(v: usize, g: &PolytreeGraph, alphabet: &Alphabet, gamma: &Gamma<f64>, rng: &mut ChaCha20Rng) -> Result<Cpt> {
    let parents = g.parents(v).to_vec();
    let rows = alphabet.configurations(&parents)?;
    let table = (0..rows).map(|_| dirichlet_row(alphabet.size(v), gamma, rng)).collect();
    Ok(Cpt { node: v, parents, table })
}

/// Edges `(parent, child, I(parent; child))` whose MI falls below `threshold`.
fn weak_edges(joint: &JointTable, g: &PolytreeGraph, threshold: f64) -> Result<Vec<(usize, usize, f64)>> {
    let mut weak = Vec::new();
    for &(u, v) in g.edges() {
        let mi = mutual_information(joint, &[u], &[v])?;
        if mi < threshold {
            weak.push((u, v, mi));
        }
    }
    Ok(weak)
}

/// Draws Dirichlet CPTs for `g`. With `min_edge_mi`, the CPTs at both ends
/// of every weak edge are redrawn until all edges clear the threshold, with
/// periodic full redraws.
pub fn random_cpts(
    g: &PolytreeGraph,
    alphabet: &Alphabet,
    concentration: f64,
    min_edge_mi: Option<f64>,
    rng: &mut ChaCha20Rng,
) -> Result<DiscreteBayesNet> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("concentration {concentration}: {e}")))?;
    let mut cpts = (0..g.n())
        .map(|v| random_cpt(v, g, alphabet, &gamma, rng))
        .collect::<Result<Vec<_>>>()?;
    let Some(threshold) = min_edge_mi else {
        return DiscreteBayesNet::new(g.clone(), alphabet.clone(), cpts);
    };
    let mut attempts = 0;
    loop {
        let bn = DiscreteBayesNet::new(g.clone(), alphabet.clone(), cpts.clone())?;
        let joint = bn.joint_distribution()?;
        let weak = weak_edges(&joint, g, threshold)?;
        let Some(&(parent, child, mi)) = weak.iter().min_by(|a, b| a.2.total_cmp(&b.2)) else {
            return Ok(bn);
        };
        attempts += 1;
        if attempts > RESAMPLE_ATTEMPTS {
            return Err(Error::ResampleExhausted { attempts: RESAMPLE_ATTEMPTS, parent, child, mi });
        }
        // a weak edge stems from a child that ignores its parent or from a
        // near-constant parent; redraw the child, and the parent when its
        // marginal entropy is low
        let mut touched = Vec::with_capacity(2 * weak.len());
        for &(u, v, _) in &weak {
            touched.push(v);
            if entropy(&joint.marginal(&[u])?) < LOW_ENTROPY_BITS {
                touched.push(u);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for v in touched {
            cpts[v] = random_cpt(v, g, alphabet, &gamma, rng)?;
        }
    }
}

pub fn random_polytree(spec: &InstanceSpec) -> Result<DiscreteBayesNet> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let tree = random_tree(spec.n, &mut rng);
    let kept: Vec<(usize, usize)> = if spec.edge_drop > 0.0 {
        tree.edges().iter().copied().filter(|_| !rng.random_bool(spec.edge_drop)).collect()
    } else {
        tree.edges().to_vec()
    };
    let skeleton = Skeleton::new(spec.n, kept)?;
    let graph = random_orientation(&skeleton, spec.d, &mut rng);
    let alphabet = Alphabet::uniform(spec.n, spec.alphabet_size)?;
    random_cpts(&graph, &alphabet, spec.cpt_concentration, spec.min_edge_mi, &mut rng)
}

/// Vertex names of the example polytree, indexed by variable.
pub const FIGURE1_NAMES: [&str; 10] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];

/// `a->d, b->d, c->d, d->f, e->f, f->g, e->h, g->i, j->g`.
pub const FIGURE1_ARCS: [(usize, usize); 9] = [(0, 3), (1, 3), (2, 3), (3, 5), (4, 5), (5, 6), (4, 7), (6, 8), (9, 6)];

pub fn figure1_graph() -> PolytreeGraph {
    PolytreeGraph::new(10, FIGURE1_ARCS).expect("fixture is a polytree")
}

/// Binary ten-vertex 3-polytree with Dirichlet(1) CPTs.
pub fn figure1_fixture(seed: RngSeed) -> Result<DiscreteBayesNet> {
    figure1_fixture_with(seed, 1.0, None)
}

pub fn figure1_fixture_with(seed: RngSeed, concentration: f64, min_edge_mi: Option<f64>) -> Result<DiscreteBayesNet> {
    let mut rng = seed.rng();
    random_cpts(&figure1_graph(), &Alphabet::binary(10), concentration, min_edge_mi, &mut rng)
}
