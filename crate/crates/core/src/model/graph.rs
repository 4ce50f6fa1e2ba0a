//! Polytrees and their skeletons.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Union-find over `0..n` with path halving and union by size.
#[derive(Clone, Debug)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Undirected forest on `n` vertices. Edges are stored as `(u, v)` with `u < v`,
/// sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::new();
        let mut seen = BTreeSet::new();
        let mut dsu = DisjointSets::new(n);
        for (u, v) in edges {
            check_endpoints(n, u, v)?;
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge {}-{}", e.0, e.1)));
            }
            if !dsu.union(u, v) {
                return Err(Error::NotAForest { u: e.0, v: e.1 });
            }
            normalized.push(e);
        }
        normalized.sort_unstable();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Skeleton { n, edges: normalized, adjacency })
    }

    pub fn empty(n: usize) -> Self {
        Skeleton { n, edges: Vec::new(), adjacency: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Component label per vertex; labels are the smallest vertex of each component.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        for root in 0..self.n {
            if label[root] != usize::MAX {
                continue;
            }
            let mut stack = vec![root];
            label[root] = root;
            while let Some(x) = stack.pop() {
                for &y in &self.adjacency[x] {
                    if label[y] == usize::MAX {
                        label[y] = root;
                        stack.push(y);
                    }
                }
            }
        }
        label
    }

    /// Unique path from `from` to `to` (inclusive), if they are connected.
    pub fn path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n];
        prev[from] = from;
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                break;
            }
            for &y in &self.adjacency[x] {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    stack.push(y);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// One `u v` pair per line with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => {
                    return Err(Error::InvalidGraph(format!(
                        "line {}: expected `u v`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Skeleton::new(n, edges)
    }
}

fn check_endpoints(n: usize, u: usize, v: usize) -> Result<()> {
    for x in [u, v] {
        if x >= n {
            return Err(Error::VariableOutOfRange { index: x, n });
        }
    }
    if u == v {
        return Err(Error::InvalidGraph(format!("self-loop at {u}")));
    }
    Ok(())
}

/// Directed graph whose skeleton is a forest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolytreeGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl PolytreeGraph {
    /// Edges are `(parent, child)` pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(u, v) in &edges {
            check_endpoints(n, u, v)?;
        }
        // Validates duplicates in either direction and acyclicity of the skeleton.
        Skeleton::new(n, edges.iter().copied())?;
        edges.sort_unstable();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(u, v) in &edges {
            parents[v].push(u);
            children[u].push(v);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        Ok(PolytreeGraph { n, edges, parents, children })
    }

    pub fn empty(n: usize) -> Self {
        PolytreeGraph { n, edges: Vec::new(), parents: vec![Vec::new(); n], children: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(parent, child)` pairs in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parents of `v`, ascending.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.parents[v].len()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_d_polytree(&self, d: usize) -> bool {
        self.max_in_degree() <= d
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.children[u].binary_search(&v).is_ok()
    }

    pub fn skeleton(&self) -> Skeleton {
        Skeleton::new(self.n, self.edges.iter().copied()).expect("polytree skeleton is a forest")
    }

    /// Kahn order, smallest ready vertex first.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }
}
