//! Named property checks across every module, with fixed seeds.
//!
//! Each check returns a [`CheckOutcome`]; [`run_suite`] runs all of them.
//! The parameterized checks are also used directly by the acceptance tests.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::ci_tester::{required_sample_size, test_cmi, TesterConfig, TesterMode, DEFAULT_C};
use crate::error::Result;
use crate::gadgets::{self, build_gadget, certify_gadget, cross_kl_identities, tensor_copies, GadgetPair};
use crate::harness::{self, median, InstanceSource, LearnConfig};
use crate::instance::{figure1_fixture, random_cpts, random_orientation, random_polytree, random_tree, InstanceSpec};
use crate::model::{
    conditional_mutual_information, kl_divergence, mi_score, mutual_information, project_onto, Alphabet,
    DiscreteBayesNet, JointTable, ModelJson, PolytreeGraph, Skeleton,
};
use crate::orientation::{phase1, phase2, phase3, OrientationConfig, OrientationTrace, PartialOrientation, Rule};
use crate::param_fit::{fit_cpts, SmoothingRule};
use crate::rng::RngSeed;
use crate::sampling::{empirical_cmi, forward_sample, sample_multinomial, Dataset};
use crate::skeleton::{check_assumption, chow_liu_skeleton, pairwise_mi, MiMatrix};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, cases: usize, detail: impl Into<String>) -> Self {
        CheckOutcome { name: name.to_string(), passed, cases, detail: detail.into() }
    }

    fn from_result(name: &str, r: Result<(bool, usize, String)>) -> Self {
        match r {
            Ok((passed, cases, detail)) => CheckOutcome::new(name, passed, cases, detail),
            Err(e) => CheckOutcome::new(name, false, 0, format!("error: {e}")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: RngSeed,
    /// Negative control: run the row-sum check on a model with one row summing to 0.9.
    pub inject_corrupt_cpt: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: RngSeed(20_240_601), inject_corrupt_cpt: false }
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckOutcome> {
    let s = |i: u64| opts.seed.derive(i);
    let mut out = vec![
        eq1_equivalence(50, 5, s(1)),
        lemma12_identity(200, s(2)),
        lemma13_parent_identities(50, s(3)),
        nonnegativity(200, s(4)),
        projection_optimality(10, 20, s(5)),
        cpt_row_sums(opts.inject_corrupt_cpt, s(6)),
        corrupt_row_detected(s(7)),
        json_round_trip(20, s(8)),
        plugin_consistency(s(9)),
        sampling_determinism(s(10)),
        mi_concentration(30, s(11)),
        verdict_consistency(s(12)),
        oracle_tester_soundness(100, s(13)),
        tester_calibration(200, s(14)),
    ];
    out.extend(oracle_pipeline(100, s(15)));
    out.extend([
        chow_liu_forest(100, s(16)),
        skeleton_determinism(s(17)),
    ]);
    out.extend(skeleton_recovery(10, 10, s(18)));
    out.extend([
        fitted_rows(s(19)),
        mle_matches_plugin(s(20)),
        fitted_kl_decreases(30, s(21)),
        gadget_atoms(&[0.05, 0.1, 0.2, 0.3, 0.4, 0.5]),
        gadget_certificates(&[0.05, 0.1, 0.2, 0.3, 0.4, 0.5]),
        tensorization(0.2, &[2, 3]),
        distinguisher_scaling(500, s(22)),
        instance_invariants(500, s(23)),
        instance_determinism(s(24)),
        parent_independence(30, s(25)),
        csv_schema(s(26)),
        oracle_runs_reproducible(s(27)),
    ]);
    out
}

// ---------------------------------------------------------------------------
// helpers

fn dirichlet(len: usize, concentration: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let g = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let w: Vec<f64> = (0..len).map(|_| g.sample(rng)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Dense joint on 3..=max_n variables with 2 or 3 states each.
pub fn random_joint(max_n: usize, rng: &mut ChaCha20Rng) -> JointTable {
    let n = rng.random_range(3..=max_n);
    let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let len = sizes.iter().product();
    let pmf = dirichlet(len, 0.7, rng);
    JointTable::from_weights(sizes, pmf).expect("valid weights")
}

/// A vertex and two disjoint nonempty sets avoiding it.
fn random_triple(n: usize, rng: &mut ChaCha20Rng) -> (usize, Vec<usize>, Vec<usize>) {
    let mut vars: Vec<usize> = (0..n).collect();
    vars.shuffle(rng);
    let v = vars[0];
    let rest = &vars[1..];
    let total = rng.random_range(2..=rest.len());
    let split = rng.random_range(1..total);
    (v, rest[..split].to_vec(), rest[split..total].to_vec())
}

fn random_instance(n: usize, d: usize, min_edge_mi: Option<f64>, seed: RngSeed) -> Result<DiscreteBayesNet> {
    let mut spec = InstanceSpec::new(n, d, seed);
    spec.min_edge_mi = min_edge_mi;
    random_polytree(&spec)
}

/// All ways to pick disjoint nonempty `A`, `B` from `set`.
fn disjoint_pairs(set: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let k = set.len();
    let mut out = Vec::new();
    // each element: 0 unused, 1 in A, 2 in B
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut c = code;
        for &x in set {
            match c % 3 {
                1 => a.push(x),
                2 => b.push(x),
                _ => {}
            }
            c /= 3;
        }
        if !a.is_empty() && !b.is_empty() {
            out.push((a, b));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// exact model

/// `KL(P || P_G) = mi_score(P, G*) - mi_score(P, G)` for `P` Markov to `G*`.
/// Candidates mix re-orientations of the true skeleton and unrelated trees.
pub fn eq1_equivalence(instances: usize, candidates: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for i in 0..instances {
            let s = seed.derive(i as u64);
            let mut rng = s.derive(1).rng();
            let n = rng.random_range(2..=8);
            let d = rng.random_range(1..=3);
            let bn = random_instance(n, d, None, s)?;
            let joint = bn.joint_distribution()?;
            let star = mi_score(&joint, bn.graph())?;
            for c in 0..candidates {
                let skel = if c % 2 == 0 { bn.graph().skeleton() } else { random_tree(n, &mut rng) };
                let g = random_orientation(&skel, n, &mut rng);
                let kl = kl_divergence(&joint, &project_onto(&joint, &g)?.joint_distribution()?)?;
                let gap = star - mi_score(&joint, &g)?;
                worst = worst.max((kl - gap).abs());
                cases += 1;
            }
        }
        Ok((worst <= 1e-9, cases, format!("max residual {worst:.3e}")))
    };
    CheckOutcome::from_result("model.eq1_equivalence", run())
}

/// `I(v; A∪B) = I(v;A) + I(v;B) + I(A;B|v) - I(A;B)` on arbitrary joints.
pub fn lemma12_identity(cases: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut rng = seed.rng();
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let p = random_joint(5, &mut rng);
            let (v, a, b) = random_triple(p.n_vars(), &mut rng);
            let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
            let lhs = mutual_information(&p, &[v], &ab)?;
            let rhs = mutual_information(&p, &[v], &a)? + mutual_information(&p, &[v], &b)?
                + conditional_mutual_information(&p, &a, &b, &[v])?
                - mutual_information(&p, &a, &b)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok((worst <= 1e-9, cases, format!("max residual {worst:.3e}")))
    };
    CheckOutcome::from_result("model.lemma12_identity", run())
}

/// For disjoint parent subsets `A`, `B` of a polytree vertex `v`:
/// `I(v; A∪B) = I(v;A) + I(v;B) + I(A;B|v)` and `I(v;A) >= sum_u I(v;u)`.
pub fn lemma13_parent_identities(instances: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst_identity = 0.0f64;
        let mut worst_super = 0.0f64;
        let mut cases = 0;
        let mut i = 0u64;
        let mut used = 0;
        while used < instances {
            let s = seed.derive(i);
            i += 1;
            let mut rng = s.derive(1).rng();
            let n = rng.random_range(3..=8);
            let bn = random_instance(n, 3, None, s)?;
            let g = bn.graph();
            if g.max_in_degree() < 2 {
                continue;
            }
            used += 1;
            let joint = bn.joint_distribution()?;
            for v in 0..n {
                let parents = g.parents(v);
                if parents.len() < 2 {
                    continue;
                }
                for (a, b) in disjoint_pairs(parents) {
                    let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
                    let lhs = mutual_information(&joint, &[v], &ab)?;
                    let rhs = mutual_information(&joint, &[v], &a)? + mutual_information(&joint, &[v], &b)?
                        + conditional_mutual_information(&joint, &a, &b, &[v])?;
                    worst_identity = worst_identity.max((lhs - rhs).abs());
                    let single: f64 = a.iter().map(|&u| mutual_information(&joint, &[v], &[u])).sum::<Result<f64>>()?;
                    worst_super = worst_super.max(single - mutual_information(&joint, &[v], &a)?);
                    cases += 1;
                }
            }
        }
        Ok((
            worst_identity <= 1e-9 && worst_super <= 1e-9,
            cases,
            format!("identity residual {worst_identity:.3e}; superadditivity slack {worst_super:.3e}"),
        ))
    };
    CheckOutcome::from_result("model.lemma13_parent_identities", run())
}

pub fn nonnegativity(cases: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut rng = seed.rng();
        let mut lowest = f64::INFINITY;
        for _ in 0..cases {
            let p = random_joint(5, &mut rng);
            let q = random_joint_like(&p, &mut rng);
            let (v, a, b) = random_triple(p.n_vars(), &mut rng);
            lowest = lowest
                .min(mutual_information(&p, &a, &b)?)
                .min(conditional_mutual_information(&p, &a, &b, &[v])?)
                .min(kl_divergence(&p, &q)?)
                .min(kl_divergence(&p, &p)?);
        }
        Ok((lowest >= -1e-12, cases, format!("smallest value {lowest:.3e}")))
    };
    CheckOutcome::from_result("model.nonnegativity", run())
}

fn random_joint_like(p: &JointTable, rng: &mut ChaCha20Rng) -> JointTable {
    JointTable::from_weights(p.sizes().to_vec(), dirichlet(p.len(), 0.7, rng)).expect("valid weights")
}

/// No CPT assignment on `G` beats the projection in KL.
pub fn projection_optimality(instances: usize, alternatives: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = f64::NEG_INFINITY;
        let mut cases = 0;
        for i in 0..instances {
            let s = seed.derive(i as u64);
            let mut rng = s.derive(1).rng();
            let n = rng.random_range(2..=7);
            let bn = random_instance(n, 2, None, s)?;
            let joint = bn.joint_distribution()?;
            let g = random_orientation(&random_tree(n, &mut rng), n, &mut rng);
            let best = kl_divergence(&joint, &project_onto(&joint, &g)?.joint_distribution()?)?;
            for _ in 0..alternatives {
                let q = random_cpts(&g, bn.alphabet(), 1.0, None, &mut rng)?;
                let kl = kl_divergence(&joint, &q.joint_distribution()?)?;
                worst = worst.max(best - kl);
                cases += 1;
            }
        }
        Ok((worst <= 1e-9, cases, format!("max (projection - alternative) {worst:.3e}")))
    };
    CheckOutcome::from_result("model.projection_optimality", run())
}

fn rows_valid(model: &ModelJson) -> std::result::Result<(), String> {
    for cpt in &model.cpts {
        if let Some((row, sum)) = cpt.row_violation() {
            return Err(format!("node {} row {row} sums to {sum}", cpt.node));
        }
    }
    Ok(())
}

fn corrupt(model: &mut ModelJson) {
    let row = &mut model.cpts[0].table[0];
    let sum: f64 = row.iter().sum();
    for x in row.iter_mut() {
        *x *= 0.9 / sum;
    }
}

/// Every CPT row of generated and fitted models sums to 1 within 1e-12.
pub fn cpt_row_sums(inject_corrupt_cpt: bool, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut models = Vec::new();
        for i in 0..20 {
            let bn = random_instance(6, 3, None, seed.derive(i))?;
            let data = forward_sample(&bn, 200, seed.derive(100 + i))?;
            models.push(ModelJson::from(&bn));
            models.push(ModelJson::from(&fit_cpts(&data, bn.graph(), SmoothingRule::laplace())?));
        }
        if inject_corrupt_cpt {
            corrupt(&mut models[0]);
        }
        for m in &models {
            if let Err(msg) = rows_valid(m) {
                return Ok((false, models.len(), msg));
            }
        }
        Ok((true, models.len(), "all rows sum to 1".into()))
    };
    CheckOutcome::from_result("model.cpt_row_sums", run())
}

/// A row summing to 0.9 is caught both by the row check and on load.
pub fn corrupt_row_detected(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut model = ModelJson::from(&figure1_fixture(seed)?);
        corrupt(&mut model);
        let flagged = rows_valid(&model).is_err();
        let rejected = DiscreteBayesNet::try_from(model).is_err();
        Ok((flagged && rejected, 1, format!("flagged {flagged}, rejected on load {rejected}")))
    };
    CheckOutcome::from_result("model.corrupt_row_detected", run())
}

pub fn json_round_trip(instances: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        for i in 0..instances {
            let mut spec = InstanceSpec::new(5, 2, seed.derive(i as u64));
            spec.alphabet_size = 2 + i % 3;
            let text = random_polytree(&spec)?.to_json()?;
            let again = DiscreteBayesNet::from_json(&text)?.to_json()?;
            if again != text {
                return Ok((false, i + 1, format!("instance {i} changed on reload")));
            }
        }
        Ok((true, instances, "byte-stable".into()))
    };
    CheckOutcome::from_result("model.json_round_trip", run())
}

// ---------------------------------------------------------------------------
// sampling

/// `empirical_cmi(A, B, {})` equals the MI of the empirical joint, bit for bit.
pub fn plugin_consistency(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let bn = figure1_fixture(seed)?;
        let data = forward_sample(&bn, 2000, seed.derive(1))?;
        let mut rng = seed.derive(2).rng();
        let cases = 100;
        for _ in 0..cases {
            let (_, mut a, mut b) = random_triple(data.n(), &mut rng);
            a.sort_unstable();
            b.sort_unstable();
            let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
            let joint = data.empirical_joint(&ab)?;
            let direct =
                mutual_information(&joint, &(0..a.len()).collect::<Vec<_>>(), &(a.len()..ab.len()).collect::<Vec<_>>())?;
            let via = empirical_cmi(&data, &a, &b, &[])?;
            if direct.to_bits() != via.to_bits() {
                return Ok((false, cases, format!("{a:?} vs {b:?}: {direct} != {via}")));
            }
        }
        Ok((true, cases, "bit-identical".into()))
    };
    CheckOutcome::from_result("sampling.plugin_consistency", run())
}

pub fn sampling_determinism(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let bn = figure1_fixture(seed)?;
        let csv = |d: &Dataset| -> Result<Vec<u8>> {
            let mut buf = Vec::new();
            d.write_csv(&mut buf)?;
            Ok(buf)
        };
        let a = csv(&forward_sample(&bn, 5000, seed.derive(1))?)?;
        let b = csv(&forward_sample(&bn, 5000, seed.derive(1))?)?;
        let c = csv(&forward_sample(&bn, 5000, seed.derive(2))?)?;
        Ok((a == b && a != c, 3, "same seed identical, different seed differs".into()))
    };
    CheckOutcome::from_result("sampling.seed_determinism", run())
}

/// Median `|I_hat - I|` over seeds does not grow with `m` (one inversion of
/// at most 10% allowed).
pub fn mi_concentration(seeds: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let bn = figure1_fixture(seed)?;
        let joint = bn.joint_distribution()?;
        let truth = mutual_information(&joint, &[3], &[5])?;
        let mut medians = Vec::new();
        for (k, m) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            let mut errs = (0..seeds)
                .map(|s| {
                    let d = forward_sample(&bn, m, seed.derive(1000 * k as u64 + s as u64))?;
                    Ok((empirical_cmi(&d, &[3], &[5], &[])? - truth).abs())
                })
                .collect::<Result<Vec<f64>>>()?;
            medians.push(median(&mut errs));
        }
        let inversions: Vec<f64> =
            medians.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[1] - w[0]) / w[0]).collect();
        let ok = inversions.is_empty() || (inversions.len() == 1 && inversions[0] <= 0.1);
        Ok((ok, 3 * seeds, format!("median errors {}", sci(&medians))))
    };
    CheckOutcome::from_result("sampling.mi_concentration", run())
}

// ---------------------------------------------------------------------------
// tester

pub fn verdict_consistency(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let bn = figure1_fixture(seed)?;
        let data = forward_sample(&bn, 3000, seed.derive(1))?;
        let cfg = TesterConfig::new(0.5, 0.01, 0.1, TesterMode::Empirical(&data))?;
        let mut rng = seed.derive(2).rng();
        let cases = 200;
        for _ in 0..cases {
            let (v, a, b) = random_triple(data.n(), &mut rng);
            let first = test_cmi(&cfg, &a, &b, &[v])?;
            let again = test_cmi(&cfg, &a, &b, &[v])?;
            if first != again || first.is_large != (first.estimate >= first.threshold) {
                return Ok((false, cases, format!("inconsistent verdict {first:?}")));
            }
        }
        Ok((true, cases, "pure threshold, repeatable".into()))
    };
    CheckOutcome::from_result("ci_tester.verdict_consistency", run())
}

/// In oracle mode a "large" verdict implies positive exact CMI.
pub fn oracle_tester_soundness(cases: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut large = 0;
        for i in 0..cases {
            let bn = random_instance(6, 3, None, seed.derive(i as u64))?;
            let joint = bn.joint_distribution()?;
            let cfg = TesterConfig::new(DEFAULT_C, 1e-9, 0.1, TesterMode::Oracle(&joint))?;
            let mut rng = seed.derive(10_000 + i as u64).rng();
            let (v, a, b) = random_triple(6, &mut rng);
            let verdict = test_cmi(&cfg, &a, &b, &[v])?;
            if verdict.is_large {
                large += 1;
                if conditional_mutual_information(&joint, &a, &b, &[v])? <= 0.0 {
                    return Ok((false, cases, format!("large verdict with zero CMI: {verdict:?}")));
                }
            }
        }
        Ok((true, cases, format!("{large} large verdicts, all with positive CMI")))
    };
    CheckOutcome::from_result("ci_tester.oracle_soundness", run())
}

/// False-"large" rate under exact independence at the formula's sample size.
/// Samples are drawn as multinomial counts, so N in the tens of billions is cheap.
pub fn tester_calibration(trials: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let (eps, delta) = (0.1, 0.1);
        let n = required_sample_size(2, 2, 1, eps, delta)?;
        let independent = JointTable::new(vec![2, 2], vec![0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4])?;
        let mut false_large = 0;
        let mut largest = 0.0f64;
        for t in 0..trials {
            let emp = sample_multinomial(&independent, n, seed.derive(t as u64))?;
            let cfg = TesterConfig::new(DEFAULT_C, eps, delta, TesterMode::Tabulated(&emp))?;
            let v = test_cmi(&cfg, &[0], &[1], &[])?;
            largest = largest.max(v.estimate);
            false_large += v.is_large as usize;
        }
        let rate = false_large as f64 / trials as f64;
        Ok((
            rate <= delta,
            trials,
            format!("N = {n}, false-large rate {rate}, largest estimate {largest:.3e} vs threshold {:.3e}", DEFAULT_C * eps),
        ))
    };
    CheckOutcome::from_result("ci_tester.calibration", run())
}

// ---------------------------------------------------------------------------
// orientation

#[derive(Clone, Debug, Default)]
struct PipelineStats {
    instances: usize,
    unsound: Vec<String>,
    worst_slack: f64,
    bound_failures: Vec<String>,
    invariant_failures: Vec<String>,
    phase3_failures: Vec<String>,
    termination_failures: Vec<String>,
}

/// Oracle-mode orientation on random d-polytrees (n <= 10, d* <= 3, edge MI at
/// least 0.02 bits, eps' = 1e-9). Returns soundness of Phases 1-2 against the
/// generating graph, the score bound, trace invariants, Phase-3 in-degree and
/// Phase-2 termination as separate outcomes.
pub fn oracle_pipeline(instances: usize, seed: RngSeed) -> Vec<CheckOutcome> {
    let eps_prime = 1e-9;
    let run = || -> Result<PipelineStats> {
        let mut st = PipelineStats { worst_slack: f64::INFINITY, ..Default::default() };
        for i in 0..instances {
            let s = seed.derive(i as u64);
            let n = s.derive(1).rng().random_range(3..=10);
            let bn = random_instance(n, 3, Some(0.02), s)?;
            let g_star = bn.graph();
            let joint = bn.joint_distribution()?;
            let cfg = OrientationConfig::new(3, eps_prime, DEFAULT_C, TesterMode::Oracle(&joint))?;
            let skel = g_star.skeleton();
            let mut state = PartialOrientation::new(skel.clone());
            let mut trace = OrientationTrace::default();
            phase1(&mut state, &cfg, &mut trace)?;
            let passes = phase2(&mut state, &cfg, &mut trace)?;
            for (u, v) in state.arcs() {
                if !g_star.has_arc(u, v) {
                    st.unsound.push(format!("instance {i}: {u}->{v}"));
                }
            }
            if passes > skel.edges().len() + 1 {
                st.termination_failures.push(format!("instance {i}: {passes} passes"));
            }
            let g_hat = phase3(&mut state, &mut trace)?;
            let gap = mi_score(&joint, g_star)? - mi_score(&joint, &g_hat)?;
            let bound = n as f64 * (g_star.max_in_degree() as f64 + 1.0) * eps_prime + 1e-9;
            st.worst_slack = st.worst_slack.min(bound - gap);
            if gap > bound {
                st.bound_failures.push(format!("instance {i}: gap {gap:.3e} > {bound:.3e}"));
            }
            let mut h_in = vec![0usize; n];
            for e in trace.events.iter().filter(|e| e.rule == Rule::Free) {
                h_in[e.v] += 1;
            }
            if h_in.iter().any(|&k| k > 1) {
                st.phase3_failures.push(format!("instance {i}"));
            }
            if !trace_is_monotone(&trace, &skel)? {
                st.invariant_failures.push(format!("instance {i}"));
            }
            st.instances += 1;
        }
        Ok(st)
    };
    let names = [
        "orientation.oracle_soundness",
        "orientation.score_bound",
        "orientation.partition_invariant",
        "orientation.phase3_in_degree",
        "orientation.phase2_termination",
    ];
    match run() {
        Err(e) => names.iter().map(|n| CheckOutcome::new(n, false, 0, format!("error: {e}"))).collect(),
        Ok(st) => {
            let list = |v: &[String]| if v.is_empty() { "none".to_string() } else { v.join("; ") };
            vec![
                CheckOutcome::new(names[0], st.unsound.is_empty(), st.instances, format!("arcs not in G*: {}", list(&st.unsound))),
                CheckOutcome::new(
                    names[1],
                    st.bound_failures.is_empty(),
                    st.instances,
                    format!("min slack {:.3e}; failures: {}", st.worst_slack, list(&st.bound_failures)),
                ),
                CheckOutcome::new(names[2], st.invariant_failures.is_empty(), st.instances, list(&st.invariant_failures)),
                CheckOutcome::new(names[3], st.phase3_failures.is_empty(), st.instances, list(&st.phase3_failures)),
                CheckOutcome::new(names[4], st.termination_failures.is_empty(), st.instances, list(&st.termination_failures)),
            ]
        }
    }
}

/// Replays a trace, checking the partition after every step and that the
/// oriented set only grows.
fn trace_is_monotone(trace: &OrientationTrace, skel: &Skeleton) -> Result<bool> {
    let mut state = PartialOrientation::new(skel.clone());
    let mut previous = 0;
    for e in &trace.events {
        state.orient(e.u, e.v)?;
        let now = state.arcs().len();
        if now != previous + 1 || !state.invariants_hold() {
            return Ok(false);
        }
        previous = now;
    }
    Ok(state.is_complete())
}

// ---------------------------------------------------------------------------
// skeleton

pub fn chow_liu_forest(cases: usize, seed: RngSeed) -> CheckOutcome {
    let mut rng = seed.rng();
    for c in 0..cases {
        let n = rng.random_range(1..=12);
        let zero_prob = rng.random_range(0.0..0.8);
        let weights: Vec<f64> = (0..n * n).map(|_| if rng.random_bool(zero_prob) { 0.0 } else { rng.random() }).collect();
        let mi = MiMatrix::from_fn(n, |u, v| weights[u * n + v]);
        let skel = chow_liu_skeleton(&mi, Some(f64::MIN_POSITIVE));
        // components of the positive-weight graph
        let positive = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| mi.get(u, v) > 0.0);
        let mut dsu = crate::model::graph::DisjointSets::new(n);
        let mut components = n;
        for (u, v) in positive {
            if dsu.union(u, v) {
                components -= 1;
            }
        }
        // Skeleton::new already rejects cycles; a forest spanning the
        // positive components has exactly n - components edges
        if skel.edges().len() + components != n {
            return CheckOutcome::new("skeleton.spanning_forest", false, c + 1, format!("case {c}: wrong edge count"));
        }
    }
    CheckOutcome::new("skeleton.spanning_forest", true, cases, "forests span positive components")
}

pub fn skeleton_determinism(seed: RngSeed) -> CheckOutcome {
    let mut rng = seed.rng();
    let cases = 50;
    for _ in 0..cases {
        let n = rng.random_range(2..=9);
        // few distinct values force many ties
        let values: Vec<f64> = (0..n * n).map(|_| rng.random_range(0..3) as f64 * 0.25).collect();
        let mi = MiMatrix::from_fn(n, |u, v| values[u * n + v]);
        if chow_liu_skeleton(&mi, None) != chow_liu_skeleton(&mi.clone(), None) {
            return CheckOutcome::new("skeleton.determinism", false, cases, "outputs differ");
        }
    }
    CheckOutcome::new("skeleton.determinism", true, cases, "identical on repeated runs with ties")
}

/// Instance classes for the recovery experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeClass {
    Chain,
    Tree,
}

/// Random instance of the class whose exact gap is at least `min_gap` bits,
/// found by scanning derived seeds.
pub fn gapped_instance(class: TreeClass, n: usize, min_gap: f64, seed: RngSeed) -> Result<(DiscreteBayesNet, f64)> {
    for k in 0..10_000u64 {
        let s = seed.derive(k);
        let mut rng = s.rng();
        let skel = match class {
            TreeClass::Chain => Skeleton::new(n, (1..n).map(|i| (i - 1, i)))?,
            TreeClass::Tree => random_tree(n, &mut rng),
        };
        let g = random_orientation(&skel, 2, &mut rng);
        let bn = random_cpts(&g, &Alphabet::binary(n), 0.3, None, &mut rng)?;
        let report = check_assumption(&bn.joint_distribution()?, bn.graph())?;
        if report.satisfied && report.epsilon_p >= min_gap {
            return Ok((bn, report.epsilon_p));
        }
    }
    Err(crate::Error::InvalidParameter(format!("no {class:?} instance with gap >= {min_gap}")))
}

/// Chow-Liu with `m = ceil(100 ln(n) / eps_p^2)` samples recovers the exact
/// skeleton in at least 95% of trials, per class.
pub fn skeleton_recovery(instances_per_class: usize, seeds_per_instance: usize, seed: RngSeed) -> Vec<CheckOutcome> {
    [(TreeClass::Chain, "skeleton.recovery_chain"), (TreeClass::Tree, "skeleton.recovery_tree")]
        .into_iter()
        .enumerate()
        .map(|(ci, (class, name))| {
            let run = || -> Result<(bool, usize, String)> {
                let mut hits = 0;
                let mut trials = 0;
                let mut largest_m = 0;
                for i in 0..instances_per_class {
                    let s = seed.derive((ci * 100_000 + i) as u64);
                    let n = s.derive(1).rng().random_range(4..=7);
                    let (bn, eps_p) = gapped_instance(class, n, 0.05, s.derive(2))?;
                    let m = (100.0 * (n as f64).ln() / (eps_p * eps_p)).ceil() as usize;
                    largest_m = largest_m.max(m);
                    for t in 0..seeds_per_instance {
                        let data = forward_sample(&bn, m, s.derive(3 + t as u64))?;
                        let skel = chow_liu_skeleton(&pairwise_mi(&data)?, None);
                        hits += (skel == bn.graph().skeleton()) as usize;
                        trials += 1;
                    }
                }
                let rate = hits as f64 / trials as f64;
                Ok((rate >= 0.95, trials, format!("recovered {hits}/{trials}; largest m {largest_m}")))
            };
            CheckOutcome::from_result(name, run())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// parameters

pub fn fitted_rows(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = 0.0f64;
        let mut rows = 0;
        for i in 0..20 {
            let mut spec = InstanceSpec::new(6, 2, seed.derive(i));
            spec.alphabet_size = 3;
            let bn = random_polytree(&spec)?;
            let data = forward_sample(&bn, 50, seed.derive(100 + i))?;
            for rule in [SmoothingRule::laplace(), SmoothingRule::maximum_likelihood(), SmoothingRule::new(0.5)?] {
                for cpt in fit_cpts(&data, bn.graph(), rule)?.cpts() {
                    for row in &cpt.table {
                        worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
                        rows += 1;
                    }
                }
            }
        }
        Ok((worst <= 1e-12, rows, format!("max |row sum - 1| {worst:.3e}")))
    };
    CheckOutcome::from_result("param_fit.row_sums", run())
}

pub fn mle_matches_plugin(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = 0.0f64;
        for i in 0..20 {
            let bn = random_instance(6, 3, None, seed.derive(i))?;
            let data = forward_sample(&bn, 300, seed.derive(100 + i))?;
            let all: Vec<usize> = (0..6).collect();
            let projected = project_onto(&data.empirical_joint(&all)?, bn.graph())?;
            let fitted = fit_cpts(&data, bn.graph(), SmoothingRule::maximum_likelihood())?;
            for (a, b) in fitted.cpts().iter().zip(projected.cpts()) {
                for (ra, rb) in a.table.iter().zip(&b.table) {
                    for (x, y) in ra.iter().zip(rb) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        Ok((worst <= 1e-12, 20, format!("max difference {worst:.3e}")))
    };
    CheckOutcome::from_result("param_fit.mle_matches_plugin", run())
}

/// With the true graph fixed, median `KL(P || P_hat)` over seeds falls as `m` grows.
pub fn fitted_kl_decreases(seeds: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let bn = figure1_fixture(seed)?;
        let joint = bn.joint_distribution()?;
        let mut medians = Vec::new();
        for (k, m) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            let mut kls = (0..seeds)
                .map(|s| {
                    let data = forward_sample(&bn, m, seed.derive(1000 * k as u64 + s as u64))?;
                    let fit = fit_cpts(&data, bn.graph(), SmoothingRule::laplace())?;
                    kl_divergence(&joint, &fit.joint_distribution()?)
                })
                .collect::<Result<Vec<f64>>>()?;
            medians.push(median(&mut kls));
        }
        let ok = medians.windows(2).all(|w| w[1] < w[0]);
        Ok((ok, 3 * seeds, format!("median KL {}", sci(&medians))))
    };
    CheckOutcome::from_result("param_fit.kl_decreases", run())
}

// ---------------------------------------------------------------------------
// gadgets

fn ulp_distance(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

/// Atoms against the closed forms evaluated as exact sixteenths:
/// `(k + c alpha) / 16` with small integers `k`, `c`.
pub fn gadget_atoms(alphas: &[f64]) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = 0;
        let mut cases = 0;
        for &a in alphas {
            let g = build_gadget(a)?;
            for x in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        let k = if x == z { 3.0 } else { 1.0 };
                        let sign = if y == z { 1.0 } else { -1.0 };
                        let p1 = k * (1.0 + sign * a) / 16.0;
                        let p2 = (k + sign * 2.0 * a) / 16.0;
                        let i = gadgets::atom_index(x, y, z);
                        worst = worst.max(ulp_distance(g.p1.pmf()[i], p1)).max(ulp_distance(g.p2.pmf()[i], p2));
                        cases += 2;
                    }
                }
            }
        }
        Ok((worst <= 2, cases, format!("max distance {worst} ulps")))
    };
    CheckOutcome::from_result("gadgets.table_atoms", run())
}

/// Separation certificate for every `alpha`, with the cross projections
/// matching `I_P1(X;Y)` and `I_P2(X;Y|Z)`.
pub fn gadget_certificates(alphas: &[f64]) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut failures = Vec::new();
        for &a in alphas {
            let g = build_gadget(a)?;
            let r = certify_gadget(&g)?;
            let (i_xy, i_xy_z) = cross_kl_identities(&g)?;
            let identities = (r.kl.p1g2 - i_xy).abs() <= 1e-10 && (r.kl.p2g1 - i_xy_z).abs() <= 1e-10;
            if !r.checks.all() || !identities {
                failures.push(format!("alpha {a}: {:?}", r.checks));
            }
        }
        Ok((failures.is_empty(), alphas.len(), if failures.is_empty() { "all pass".into() } else { failures.join("; ") }))
    };
    CheckOutcome::from_result("gadgets.certificate", run())
}

fn projection_kl(p: &JointTable, g: &PolytreeGraph) -> Result<f64> {
    kl_divergence(p, &project_onto(p, g)?.joint_distribution()?)
}

/// KL of `k` independent copies is `k` times the single-copy KL.
pub fn tensorization(alpha: f64, ks: &[usize]) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let g = build_gadget(alpha)?;
        let single = projection_kl(&g.p1, &g.g2)?;
        let mut worst = 0.0f64;
        for &k in ks {
            let t = tensor_copies(&g, k)?;
            worst = worst.max((projection_kl(&t.p1, &t.g2)? - k as f64 * single).abs());
        }
        Ok((worst <= 1e-9, ks.len(), format!("alpha {alpha}: max |KL_k - k KL_1| {worst:.3e}")))
    };
    CheckOutcome::from_result("gadgets.tensorization", run())
}

/// Error of the likelihood-ratio test between `P1` and `P2` from `n` samples,
/// averaged over both hypotheses.
pub fn lrt_error(g: &GadgetPair, n: u64, trials: usize, seed: RngSeed) -> Result<f64> {
    let llr: Vec<f64> = g.p1.pmf().iter().zip(g.p2.pmf()).map(|(a, b)| (a / b).ln()).collect();
    let stat = |f: &JointTable| f.pmf().iter().zip(&llr).map(|(p, l)| p * l).sum::<f64>();
    let mut errors = 0;
    for t in 0..trials {
        let from1 = sample_multinomial(&g.p1, n, seed.derive(2 * t as u64))?;
        let from2 = sample_multinomial(&g.p2, n, seed.derive(2 * t as u64 + 1))?;
        errors += (stat(&from1) <= 0.0) as usize + (stat(&from2) > 0.0) as usize;
    }
    Ok(errors as f64 / (2 * trials) as f64)
}

/// Smallest sample count on a 10%-geometric grid with LRT error at most 1/3.
pub fn distinguisher_samples(g: &GadgetPair, trials: usize, seed: RngSeed) -> Result<u64> {
    let mut n = 1.0f64;
    loop {
        let k = n.ceil() as u64;
        if lrt_error(g, k, trials, seed.derive(k))? <= 1.0 / 3.0 {
            return Ok(k);
        }
        n *= 1.1;
    }
}

/// Distinguishing sample counts scale like `1 / h2`: across alpha in
/// {0.1, 0.2, 0.4}, each measured ratio is within 2x of the h2 ratio.
pub fn distinguisher_scaling(trials: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let alphas = [0.1, 0.2, 0.4];
        let mut needed = Vec::new();
        let mut h2 = Vec::new();
        for (i, &a) in alphas.iter().enumerate() {
            let g = build_gadget(a)?;
            h2.push(certify_gadget(&g)?.h2);
            needed.push(distinguisher_samples(&g, trials, seed.derive(i as u64))? as f64);
        }
        let mut ok = true;
        let mut detail = format!("N* {needed:?}; ");
        for w in 0..2 {
            let measured = needed[w] / needed[w + 1];
            let predicted = h2[w + 1] / h2[w];
            let r = measured / predicted;
            ok &= (0.5..=2.0).contains(&r);
            detail += &format!("ratio {measured:.2} vs {predicted:.2}; ");
        }
        Ok((ok, alphas.len() * trials, detail))
    };
    CheckOutcome::from_result("gadgets.distinguisher_scaling", run())
}

// ---------------------------------------------------------------------------
// instances

pub fn instance_invariants(seeds: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut rng = seed.rng();
        for s in 0..seeds {
            let mut spec = InstanceSpec::new(rng.random_range(1..=12), rng.random_range(1..=4), seed.derive(s as u64));
            spec.edge_drop = if s % 3 == 0 { 0.2 } else { 0.0 };
            let bn = random_polytree(&spec)?;
            let g = bn.graph();
            // PolytreeGraph::new enforces the forest property
            let forest = PolytreeGraph::new(g.n(), g.edges().iter().copied()).is_ok();
            if !forest || !g.is_d_polytree(spec.d) {
                return Ok((false, s + 1, format!("seed {s}: {:?}", g.edges())));
            }
        }
        Ok((true, seeds, "forest with in-degree <= d".into()))
    };
    CheckOutcome::from_result("instance.polytree_invariants", run())
}

pub fn instance_determinism(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut spec = InstanceSpec::new(9, 3, seed);
        spec.min_edge_mi = Some(0.01);
        let a = random_polytree(&spec)?.to_json()?;
        let b = random_polytree(&spec)?.to_json()?;
        let c = figure1_fixture(seed)?.to_json()? == figure1_fixture(seed)?.to_json()?;
        Ok((a == b && c, 2, "byte-identical".into()))
    };
    CheckOutcome::from_result("instance.seed_determinism", run())
}

/// Disjoint parent subsets of any vertex are independent.
pub fn parent_independence(instances: usize, seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for i in 0..instances {
            let n = seed.derive(i as u64).rng().random_range(3..=10);
            let bn = random_instance(n, 3, None, seed.derive(1000 + i as u64))?;
            let joint = bn.joint_distribution()?;
            for v in 0..n {
                for (a, b) in disjoint_pairs(bn.graph().parents(v)) {
                    worst = worst.max(mutual_information(&joint, &a, &b)?);
                    cases += 1;
                }
            }
        }
        Ok((worst <= 1e-10, cases, format!("max I(A;B) {worst:.3e}")))
    };
    CheckOutcome::from_result("instance.parent_independence", run())
}

// ---------------------------------------------------------------------------
// harness

pub fn csv_schema(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut cfg = LearnConfig::new(InstanceSource::Figure1 { concentration: 1.0, min_edge_mi: None }, 3);
        cfg.trials = 2;
        cfg.seed = seed;
        let rows = harness::run_learn(&cfg)?;
        let mut buf = Vec::new();
        harness::write_csv(&rows, &mut buf)?;
        let text = String::from_utf8(buf).expect("csv is utf-8");
        let mut lines = text.lines();
        let header_ok = lines.next() == Some(harness::CSV_COLUMNS.join(",").as_str());
        let widths_ok = lines.all(|l| l.split(',').count() == harness::CSV_COLUMNS.len());
        Ok((header_ok && widths_ok, rows.len(), "header and row widths".into()))
    };
    CheckOutcome::from_result("harness.csv_schema", run())
}

/// Oracle runs agree byte for byte (runtime aside), independent of `jobs`.
pub fn oracle_runs_reproducible(seed: RngSeed) -> CheckOutcome {
    let run = || -> Result<(bool, usize, String)> {
        let mut spec = InstanceSpec::new(7, 3, seed);
        spec.min_edge_mi = Some(0.01);
        let mut cfg = LearnConfig::new(InstanceSource::Random { spec }, 3);
        cfg.trials = 6;
        cfg.seed = seed;
        cfg.skeleton = harness::SkeletonSource::ChowLiu;
        let strip = |rows: Vec<harness::TrialRow>| -> Vec<harness::TrialRow> {
            rows.into_iter().map(|r| harness::TrialRow { runtime_ms: 0, ..r }).collect()
        };
        let a = strip(harness::run_learn(&cfg)?);
        cfg.jobs = 3;
        let b = strip(harness::run_learn(&cfg)?);
        Ok((a == b, a.len(), "identical rows".into()))
    };
    CheckOutcome::from_result("harness.oracle_reproducible", run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_pairs_of_three() {
        // 3^3 codes minus those with an empty side: 27 - 2*8 + 1 = 12
        assert_eq!(disjoint_pairs(&[4, 5, 6]).len(), 12);
        assert!(disjoint_pairs(&[1]).is_empty());
    }

    #[test]
    fn ulps() {
        assert_eq!(ulp_distance(1.0, 1.0), 0);
        assert_eq!(ulp_distance(1.0, f64::from_bits(1.0f64.to_bits() + 2)), 2);
    }

    #[test]
    fn negative_control_fails_row_check() {
        let c = cpt_row_sums(true, RngSeed(1));
        assert!(!c.passed, "{c:?}");
        assert!(c.detail.contains("sums to"));
        assert!(cpt_row_sums(false, RngSeed(1)).passed);
    }

    #[test]
    fn lemma12_small_run() {
        let c = lemma12_identity(40, RngSeed(3));
        assert!(c.passed, "{c:?}");
        assert_eq!(c.cases, 40);
    }
}
