//! Orienting a known skeleton into a bounded in-degree polytree.
//!
//! Three phases run in order on a [`PartialOrientation`]:
//!
//! 1. [`phase1`] orients strong v-structures, largest degree first.
//! 2. [`phase2`] alternates Meek R1(d) (a vertex with `d` known parents
//!    points every other edge away) with a local search that extends known
//!    parent sets one test at a time, until nothing changes.
//! 3. [`phase3`] orients whatever is left as a 1-polytree rooted at the
//!    smallest vertex of each remaining component.
//!
//! Edges are never unoriented. Iteration order is ascending by vertex and
//! lexicographic over subsets, so a run is a pure function of its inputs.

use std::collections::BTreeSet;
use std::io::Write;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::ci_tester::{test_cmi, TestVerdict, TesterConfig, TesterMode};
use crate::error::{Error, Result};
use crate::model::{PolytreeGraph, Skeleton};

/// Skeleton plus the in/out/unoriented split of every neighborhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialOrientation {
    skeleton: Skeleton,
    n_in: Vec<BTreeSet<usize>>,
    n_out: Vec<BTreeSet<usize>>,
    n_un: Vec<BTreeSet<usize>>,
}

impl PartialOrientation {
    /// Every edge unoriented.
    pub fn new(skeleton: Skeleton) -> Self {
        let n = skeleton.n();
        let n_un = (0..n).map(|v| skeleton.neighbors(v).iter().copied().collect()).collect();
        PartialOrientation { skeleton, n_in: vec![BTreeSet::new(); n], n_out: vec![BTreeSet::new(); n], n_un }
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn n(&self) -> usize {
        self.skeleton.n()
    }

    pub fn incoming(&self, v: usize) -> &BTreeSet<usize> {
        &self.n_in[v]
    }

    pub fn outgoing(&self, v: usize) -> &BTreeSet<usize> {
        &self.n_out[v]
    }

    pub fn unoriented(&self, v: usize) -> &BTreeSet<usize> {
        &self.n_un[v]
    }

    /// Orients the unoriented edge `u - v` as `u -> v`.
    pub fn orient(&mut self, u: usize, v: usize) -> Result<()> {
        if u >= self.n() || v >= self.n() || !self.n_un[v].contains(&u) {
            return Err(Error::NotUnoriented { u, v });
        }
        self.n_un[v].remove(&u);
        self.n_in[v].insert(u);
        self.n_un[u].remove(&v);
        self.n_out[u].insert(v);
        debug_assert!(self.partition_holds(u) && self.partition_holds(v));
        Ok(())
    }

    /// `N(v)` is the disjoint union of the three sets and arcs are mirrored.
    pub fn partition_holds(&self, v: usize) -> bool {
        let sets = [&self.n_in[v], &self.n_out[v], &self.n_un[v]];
        let total: usize = sets.iter().map(|s| s.len()).sum();
        let union: BTreeSet<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
        let neighbors: BTreeSet<usize> = self.skeleton.neighbors(v).iter().copied().collect();
        total == neighbors.len()
            && union == neighbors
            && self.n_in[v].iter().all(|&u| self.n_out[u].contains(&v))
            && self.n_out[v].iter().all(|&w| self.n_in[w].contains(&v))
            && self.n_un[v].iter().all(|&w| self.n_un[w].contains(&v))
    }

    pub fn invariants_hold(&self) -> bool {
        (0..self.n()).all(|v| self.partition_holds(v))
    }

    /// Oriented arcs `(parent, child)`, sorted.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (0..self.n()).flat_map(|u| self.n_out[u].iter().map(move |&v| (u, v))).collect()
    }

    pub fn unoriented_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n()).flat_map(|u| self.n_un[u].range(u + 1..).map(move |&v| (u, v))).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.n_un.iter().all(BTreeSet::is_empty)
    }

    /// Graph of the oriented arcs only.
    pub fn oriented_graph(&self) -> PolytreeGraph {
        PolytreeGraph::new(self.n(), self.arcs()).expect("sub-forest of a forest")
    }
}

/// Inputs to the orientation algorithm: in-degree bound and tester.
#[derive(Clone, Copy, Debug)]
pub struct OrientationConfig<'a> {
    pub d: usize,
    pub tester: TesterConfig<'a>,
}

impl<'a> OrientationConfig<'a> {
    /// Per-test tolerance `epsilon_prime` and constant `c` set directly.
    pub fn new(d: usize, epsilon_prime: f64, c: f64, mode: TesterMode<'a>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("in-degree bound must be at least 1".into()));
        }
        // delta only matters for sample-size planning; it does not affect verdicts
        let tester = TesterConfig::new(c, epsilon_prime, 0.5, mode)?;
        Ok(OrientationConfig { d, tester })
    }

    /// Per-test tolerance from a target KL accuracy: `epsilon / (2 n (d + 1))`.
    pub fn for_accuracy(d: usize, epsilon: f64, n: usize, c: f64, mode: TesterMode<'a>) -> Result<Self> {
        OrientationConfig::new(d, lemma2_tolerance(epsilon, n, d), c, mode)
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.tester.epsilon
    }

    pub fn c(&self) -> f64 {
        self.tester.c
    }
}

/// `epsilon / (2 n (d + 1))`, the tolerance each individual test must meet so
/// that the union of all tests yields total accuracy `epsilon`.
pub fn lemma2_tolerance(epsilon: f64, n: usize, d: usize) -> f64 {
    epsilon / (2.0 * n.max(1) as f64 * (d + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    VStructure,
    MeekR1,
    LocalInto,
    LocalAway,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVars {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub z: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub vars: TestVars,
    pub value: f64,
    pub threshold: f64,
}

/// One orientation `u -> v` and the tests that triggered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: u8,
    pub rule: Rule,
    pub u: usize,
    pub v: usize,
    pub tests: Vec<TestRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrientationTrace {
    pub events: Vec<TraceEvent>,
}

impl OrientationTrace {
    /// Re-applies every event to a fresh copy of `skeleton`.
    pub fn replay(&self, skeleton: &Skeleton) -> Result<PartialOrientation> {
        let mut state = PartialOrientation::new(skeleton.clone());
        for e in &self.events {
            state.orient(e.u, e.v)?;
        }
        Ok(state)
    }

    /// JSON lines, one event per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push(&mut self, phase: u8, rule: Rule, u: usize, v: usize, tests: Vec<TestRecord>) {
        self.events.push(TraceEvent { phase, rule, u, v, tests });
    }
}

fn run_test(
    cfg: &OrientationConfig<'_>,
    a: &[usize],
    b: &[usize],
    z: &[usize],
) -> Result<(TestVerdict, TestRecord)> {
    let verdict = test_cmi(&cfg.tester, a, b, z)?;
    let record = TestRecord {
        vars: TestVars { a: a.to_vec(), b: b.to_vec(), z: z.to_vec() },
        value: verdict.estimate,
        threshold: verdict.threshold,
    };
    Ok((verdict, record))
}

fn check_mode(state: &PartialOrientation, cfg: &OrientationConfig<'_>) -> Result<()> {
    if cfg.tester.mode.n_vars() < state.n() {
        return Err(Error::VariableOutOfRange { index: state.n() - 1, n: cfg.tester.mode.n_vars() });
    }
    Ok(())
}

/// Orients strong deg-γ v-structures for γ = d down to 2.
///
/// A size-γ set `T` of neighbors of `v` (excluding known children) is
/// oriented into `v` when `|T ∪ N_in(v)| <= d` and every `u ∈ T` has
/// `I(u; T \ {u} | v) >= C ε'`.
pub fn phase1(state: &mut PartialOrientation, cfg: &OrientationConfig<'_>, trace: &mut OrientationTrace) -> Result<()> {
    check_mode(state, cfg)?;
    for gamma in (2..=cfg.d).rev() {
        for v in 0..state.n() {
            let eligible: Vec<usize> = state.n_in[v].union(&state.n_un[v]).copied().collect();
            for subset in eligible.into_iter().combinations(gamma) {
                let merged = subset.iter().chain(&state.n_in[v]).collect::<BTreeSet<_>>().len();
                if merged > cfg.d {
                    continue;
                }
                let mut records = Vec::with_capacity(gamma);
                let mut strong = true;
                for (i, &u) in subset.iter().enumerate() {
                    let rest: Vec<usize> =
                        subset.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &w)| w).collect();
                    let (verdict, record) = run_test(cfg, &[u], &rest, &[v])?;
                    records.push(record);
                    if !verdict.is_large {
                        strong = false;
                        break;
                    }
                }
                if !strong {
                    continue;
                }
                for &u in &subset {
                    if state.n_un[v].contains(&u) {
                        state.orient(u, v)?;
                        trace.push(1, Rule::VStructure, u, v, records.clone());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Meek R1(d) and local search until a pass orients nothing. Returns the
/// number of passes (at most `|E| + 1`).
pub fn phase2(state: &mut PartialOrientation, cfg: &OrientationConfig<'_>, trace: &mut OrientationTrace) -> Result<usize> {
    check_mode(state, cfg)?;
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;

        // Meek R1(d), exhaustively
        loop {
            let mut fired = false;
            for v in 0..state.n() {
                if state.n_in[v].len() == cfg.d && !state.n_un[v].is_empty() {
                    let away: Vec<usize> = state.n_un[v].iter().copied().collect();
                    for w in away {
                        state.orient(v, w)?;
                        trace.push(2, Rule::MeekR1, v, w, Vec::new());
                    }
                    fired = true;
                }
            }
            if !fired {
                break;
            }
            changed = true;
        }

        // one local-search sweep
        for v in 0..state.n() {
            if state.n_in[v].is_empty() || state.n_in[v].len() >= cfg.d {
                continue;
            }
            let candidates: Vec<usize> = state.n_un[v].iter().copied().collect();
            for u in candidates {
                if state.n_in[v].len() >= cfg.d {
                    break;
                }
                if !state.n_un[v].contains(&u) {
                    continue;
                }
                let parents: Vec<usize> = state.n_in[v].iter().copied().collect();
                let (into, into_rec) = run_test(cfg, &[u], &parents, &[v])?;
                if into.exceeds() {
                    state.orient(u, v)?;
                    trace.push(2, Rule::LocalInto, u, v, vec![into_rec]);
                    changed = true;
                    continue;
                }
                let (away, away_rec) = run_test(cfg, &[u], &parents, &[])?;
                if away.exceeds() {
                    state.orient(v, u)?;
                    trace.push(2, Rule::LocalAway, v, u, vec![into_rec, away_rec]);
                    changed = true;
                }
            }
        }

        if !changed {
            return Ok(passes);
        }
    }
}

/// Orients the remaining unoriented forest away from the smallest vertex of
/// each component and returns the complete orientation.
pub fn phase3(state: &mut PartialOrientation, trace: &mut OrientationTrace) -> Result<PolytreeGraph> {
    let n = state.n();
    let mut visited = vec![false; n];
    for root in 0..n {
        if visited[root] || state.n_un[root].is_empty() {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            let next: Vec<usize> = state.n_un[x].iter().copied().filter(|&y| !visited[y]).collect();
            for y in next.into_iter().rev() {
                state.orient(x, y)?;
                trace.push(3, Rule::Free, x, y, Vec::new());
                visited[y] = true;
                stack.push(y);
            }
        }
    }
    debug_assert!(state.is_complete());
    PolytreeGraph::new(n, state.arcs())
}

/// Runs all three phases on a fresh orientation of `skeleton`.
pub fn learn_orientation(skeleton: &Skeleton, cfg: &OrientationConfig<'_>) -> Result<(PolytreeGraph, OrientationTrace)> {
    let mut state = PartialOrientation::new(skeleton.clone());
    let mut trace = OrientationTrace::default();
    phase1(&mut state, cfg, &mut trace)?;
    phase2(&mut state, cfg, &mut trace)?;
    let graph = phase3(&mut state, &mut trace)?;
    Ok((graph, trace))
}
