//! Browser bindings. Every export returns a JSON string; errors come back as
//! `{"error": "..."}` so the page has one code path.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use polytree_learn::ci_tester::{required_sample_size, TesterMode, DEFAULT_C};
use polytree_learn::gadgets::{build_gadget, certify_gadget, GadgetReport};
use polytree_learn::harness::kl_accounting;
use polytree_learn::instance::{random_polytree, InstanceSpec};
use polytree_learn::model::project_onto;
use polytree_learn::orientation::{learn_orientation, lemma2_tolerance, OrientationConfig, TraceEvent};
use polytree_learn::param_fit::{fit_cpts, SmoothingRule};
use polytree_learn::sampling::forward_sample;
use polytree_learn::{Error, RngSeed};

/// Exact joints are dense; keep them small enough for a browser tab.
const MAX_N: usize = 18;
const MAX_M: usize = 1_000_000;

fn respond<T: Serialize>(r: polytree_learn::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Serialize)]
pub struct GadgetView {
    /// `(x, y, z, P1, P2)` in table order
    pub atoms: Vec<(usize, usize, usize, f64, f64)>,
    pub report: GadgetReport,
    pub passed: bool,
}

pub fn gadget_view(alpha: f64) -> polytree_learn::Result<GadgetView> {
    let g = build_gadget(alpha)?;
    let report = certify_gadget(&g)?;
    Ok(GadgetView {
        atoms: polytree_learn::gadgets::table_atoms(alpha).to_vec(),
        passed: report.checks.all(),
        report,
    })
}

/// Gadget distributions and their certificate at `alpha`.
#[wasm_bindgen]
pub fn certify(alpha: f64) -> String {
    respond(gadget_view(alpha))
}

#[derive(Serialize)]
pub struct LearnView {
    pub n: usize,
    pub truth_arcs: Vec<(usize, usize)>,
    pub learned_arcs: Vec<(usize, usize)>,
    pub trace: Vec<TraceEvent>,
    pub epsilon_prime: f64,
    pub graph_gap_bits: f64,
    pub kl_projection_bits: f64,
    pub kl_total_bits: f64,
}

/// Draws a random polytree, orients its true skeleton, and scores the result.
/// `m == 0` uses the exact distribution; otherwise `m` samples are drawn and
/// parameters are fitted with add-one smoothing.
pub fn learn_view(n: usize, d: usize, m: usize, epsilon: f64, tester_constant: f64, seed: u64) -> polytree_learn::Result<LearnView> {
    if n > MAX_N || m > MAX_M {
        return Err(Error::InvalidParameter(format!("demo limits: n <= {MAX_N}, m <= {MAX_M}")));
    }
    let seed = RngSeed(seed);
    let truth = random_polytree(&InstanceSpec::new(n, d, seed.derive(0)))?;
    let joint = truth.joint_distribution()?;
    let data = if m == 0 { None } else { Some(forward_sample(&truth, m, seed.derive(1))?) };
    let mode = match &data {
        Some(ds) => TesterMode::Empirical(ds),
        None => TesterMode::Oracle(&joint),
    };
    let epsilon_prime = lemma2_tolerance(epsilon, n, d);
    let cfg = OrientationConfig::new(d, epsilon_prime, tester_constant, mode)?;
    let skeleton = truth.graph().skeleton();
    let (g_hat, trace) = learn_orientation(&skeleton, &cfg)?;
    let learned = match &data {
        Some(ds) => fit_cpts(ds, &g_hat, SmoothingRule::new(1.0)?)?,
        None => project_onto(&joint, &g_hat)?,
    };
    let kl = kl_accounting(&joint, truth.graph(), &g_hat, &learned)?;
    Ok(LearnView {
        n,
        truth_arcs: truth.graph().edges().to_vec(),
        learned_arcs: g_hat.edges().to_vec(),
        trace: trace.events,
        epsilon_prime,
        graph_gap_bits: kl.graph_gap,
        kl_projection_bits: kl.kl_projection,
        kl_total_bits: kl.kl_total,
    })
}

/// The seed is 32-bit so the page can pass a plain number.
#[wasm_bindgen]
pub fn learn(n: usize, d: usize, m: usize, epsilon: f64, tester_constant: f64, seed: u32) -> String {
    respond(learn_view(n, d, m, epsilon, tester_constant, seed as u64))
}

#[wasm_bindgen]
pub fn default_tester_constant() -> f64 {
    DEFAULT_C
}

/// Tester sample size for the given cardinalities, as a decimal string
/// (it can exceed 2^53).
#[wasm_bindgen]
pub fn sample_size(sigma_x: usize, sigma_y: usize, sigma_z: usize, epsilon: f64, delta: f64) -> String {
    respond(required_sample_size(sigma_x, sigma_y, sigma_z, epsilon, delta).map(|n| n.to_string()))
}
