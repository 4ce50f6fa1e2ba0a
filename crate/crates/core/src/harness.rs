//! End-to-end learning trials: instance, samples, skeleton, orientation,
//! parameters, and exact KL accounting. Used by the `learn` command.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci_tester::{TesterMode, DEFAULT_C};
use crate::error::{Error, Result};
use crate::instance::{figure1_fixture_with, random_polytree, InstanceSpec};
use crate::model::{kl_divergence, mi_score, project_onto, DiscreteBayesNet, JointTable, PolytreeGraph, Skeleton};
use crate::orientation::{learn_orientation, lemma2_tolerance, OrientationConfig};
use crate::param_fit::{fit_cpts, SmoothingRule};
use crate::rng::{RngSeed, RNG_ALGORITHM};
use crate::sampling::{forward_sample, Dataset};
use crate::skeleton::{chow_liu_skeleton, pairwise_mi};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkeletonSource {
    Given,
    ChowLiu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Oracle,
    Empirical,
}

impl ModeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Oracle => "oracle",
            ModeKind::Empirical => "empirical",
        }
    }
}

/// Where each trial's ground truth comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Fresh random polytree per trial; the spec's seed is replaced by the trial seed.
    Random { spec: InstanceSpec },
    /// The ten-vertex example with per-trial CPTs.
    Figure1 { concentration: f64, min_edge_mi: Option<f64> },
    /// One fixed model for every trial.
    Fixed { model: crate::model::ModelJson },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub instance: InstanceSource,
    /// In-degree bound handed to the learner.
    pub in_degree_bound: usize,
    /// Target KL accuracy; the per-test tolerance is derived from it unless
    /// `epsilon_prime` is set.
    pub epsilon: f64,
    pub epsilon_prime: Option<f64>,
    pub tester_constant: f64,
    pub delta: f64,
    /// Sample sizes; each trial runs once per entry. Ignored in oracle mode.
    pub m: Vec<usize>,
    pub trials: usize,
    pub seed: RngSeed,
    pub skeleton: SkeletonSource,
    pub mode: ModeKind,
    pub smoothing: SmoothingRule,
    /// Skip Chow-Liu pairs below this many bits.
    pub prune_below: Option<f64>,
    pub jobs: usize,
}

impl LearnConfig {
    pub fn new(instance: InstanceSource, in_degree_bound: usize) -> Self {
        LearnConfig {
            instance,
            in_degree_bound,
            epsilon: 0.1,
            epsilon_prime: None,
            tester_constant: DEFAULT_C,
            delta: 0.1,
            m: vec![10_000],
            trials: 1,
            seed: RngSeed(0),
            skeleton: SkeletonSource::Given,
            mode: ModeKind::Oracle,
            smoothing: SmoothingRule::default(),
            prune_below: None,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.in_degree_bound == 0 {
            return bad("in-degree bound must be at least 1".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if let Some(e) = self.epsilon_prime {
            if !(e.is_finite() && e > 0.0) {
                return bad(format!("epsilon-prime = {e} must be positive"));
            }
        }
        if !(self.tester_constant > 0.0 && self.tester_constant < 1.0) {
            return bad(format!("tester constant {} must lie in (0, 1)", self.tester_constant));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if self.mode == ModeKind::Empirical {
            if self.m.is_empty() {
                return bad("empirical mode needs at least one sample size".into());
            }
            if self.m.contains(&0) {
                return bad("sample sizes must be positive".into());
            }
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        match &self.instance {
            InstanceSource::Random { spec } => spec.validate()?,
            InstanceSource::Figure1 { concentration, .. } if !(concentration.is_finite() && *concentration > 0.0) => {
                return bad(format!("concentration {concentration} must be positive"));
            }
            InstanceSource::Fixed { model } => {
                DiscreteBayesNet::try_from(model.clone())?;
            }
            _ => {}
        }
        Ok(())
    }

    fn sample_sizes(&self) -> Vec<usize> {
        match self.mode {
            ModeKind::Oracle => vec![0],
            ModeKind::Empirical => self.m.clone(),
        }
    }
}

/// One CSV row. KL values are in bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub d_star: usize,
    pub m: usize,
    pub mode: String,
    pub skeleton_ok: bool,
    pub graph_gap_bits: f64,
    pub kl_total_bits: f64,
    pub kl_param_gap_bits: f64,
    pub runtime_ms: u64,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "trial",
    "seed",
    "n",
    "d",
    "d_star",
    "m",
    "mode",
    "skeleton_ok",
    "graph_gap_bits",
    "kl_total_bits",
    "kl_param_gap_bits",
    "runtime_ms",
];

/// Full outcome of a single trial, beyond the CSV columns.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub row: TrialRow,
    pub truth: DiscreteBayesNet,
    pub learned: DiscreteBayesNet,
}

pub fn instance_for_trial(source: &InstanceSource, seed: RngSeed) -> Result<DiscreteBayesNet> {
    match source {
        InstanceSource::Random { spec } => random_polytree(&InstanceSpec { seed, ..spec.clone() }),
        InstanceSource::Figure1 { concentration, min_edge_mi } => figure1_fixture_with(seed, *concentration, *min_edge_mi),
        InstanceSource::Fixed { model } => DiscreteBayesNet::try_from(model.clone()),
    }
}

fn learned_skeleton(
    source: SkeletonSource,
    truth: &PolytreeGraph,
    mode: &TesterMode<'_>,
    prune_below: Option<f64>,
) -> Result<Skeleton> {
    match source {
        SkeletonSource::Given => Ok(truth.skeleton()),
        SkeletonSource::ChowLiu => {
            let mi = match mode {
                TesterMode::Empirical(d) => pairwise_mi(*d)?,
                TesterMode::Oracle(t) | TesterMode::Tabulated(t) => pairwise_mi(*t)?,
            };
            Ok(chow_liu_skeleton(&mi, prune_below))
        }
    }
}

/// Runs one trial: `trial` indexes the instance, `m` the sample size.
pub fn run_trial(cfg: &LearnConfig, trial: usize, m: usize, m_index: usize) -> Result<TrialOutcome> {
    let start = Instant::now();
    let trial_seed = cfg.seed.derive(trial as u64);
    let truth = instance_for_trial(&cfg.instance, trial_seed.derive(0))?;
    let joint = truth.joint_distribution()?;
    let g_star = truth.graph();
    let n = truth.n();
    let d = cfg.in_degree_bound;
    let eps_prime = cfg.epsilon_prime.unwrap_or_else(|| lemma2_tolerance(cfg.epsilon, n, d));

    let data: Option<Dataset> = match cfg.mode {
        ModeKind::Oracle => None,
        ModeKind::Empirical => Some(forward_sample(&truth, m, trial_seed.derive(1 + m_index as u64))?),
    };
    let mode = match &data {
        Some(d) => TesterMode::Empirical(d),
        None => TesterMode::Oracle(&joint),
    };
    let skeleton = learned_skeleton(cfg.skeleton, g_star, &mode, cfg.prune_below)?;
    let orient_cfg = OrientationConfig::new(d, eps_prime, cfg.tester_constant, mode)?;
    let (g_hat, _) = learn_orientation(&skeleton, &orient_cfg)?;

    let learned = match &data {
        Some(d) => fit_cpts(d, &g_hat, cfg.smoothing)?,
        None => project_onto(&joint, &g_hat)?,
    };
    let metrics = kl_accounting(&joint, g_star, &g_hat, &learned)?;
    let row = TrialRow {
        trial,
        seed: trial_seed.0,
        n,
        d,
        d_star: g_star.max_in_degree(),
        m,
        mode: cfg.mode.as_str().to_string(),
        skeleton_ok: skeleton == g_star.skeleton(),
        graph_gap_bits: metrics.graph_gap,
        kl_total_bits: metrics.kl_total,
        kl_param_gap_bits: metrics.kl_total - metrics.kl_projection,
        runtime_ms: start.elapsed().as_millis() as u64,
    };
    Ok(TrialOutcome { row, truth, learned })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlAccounting {
    /// `mi_score(P, G*) - mi_score(P, G_hat)`
    pub graph_gap: f64,
    /// `KL(P || P_{G_hat})`
    pub kl_projection: f64,
    /// `KL(P || P_hat)`
    pub kl_total: f64,
}

pub fn kl_accounting(
    joint: &JointTable,
    g_star: &PolytreeGraph,
    g_hat: &PolytreeGraph,
    learned: &DiscreteBayesNet,
) -> Result<KlAccounting> {
    let graph_gap = mi_score(joint, g_star)? - mi_score(joint, g_hat)?;
    let kl_projection = kl_divergence(joint, &project_onto(joint, g_hat)?.joint_distribution()?)?;
    let kl_total = kl_divergence(joint, &learned.joint_distribution()?)?;
    Ok(KlAccounting { graph_gap, kl_projection, kl_total })
}

/// All trials, rows in `(m, trial)` order regardless of completion order.
pub fn run_learn(cfg: &LearnConfig) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .sample_sizes()
        .into_iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..cfg.trials).map(move |t| (t, m, mi)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(t, m, mi)| run_trial(cfg, t, m, mi).map(|o| o.row))
            .collect()
    })
}

pub fn write_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to re-run a command: echoed alongside every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preamble<C> {
    pub command: String,
    pub library: String,
    pub version: String,
    pub rng: String,
    pub log_base: u32,
    pub config: C,
}

impl<C: Serialize> Preamble<C> {
    pub fn new(command: &str, config: C) -> Self {
        Preamble {
            command: command.to_string(),
            library: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            log_base: 2,
            config,
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_cfg(trials: usize) -> LearnConfig {
        let mut spec = InstanceSpec::new(6, 2, RngSeed(0));
        spec.min_edge_mi = Some(0.02);
        let mut cfg = LearnConfig::new(InstanceSource::Random { spec }, 2);
        cfg.trials = trials;
        cfg.epsilon_prime = Some(1e-9);
        cfg.seed = RngSeed(12);
        cfg
    }

    #[test]
    fn zero_trials_header_only() {
        let rows = run_learn(&oracle_cfg(0)).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn oracle_rows_meet_score_bound() {
        let rows = run_learn(&oracle_cfg(8)).unwrap();
        assert_eq!(rows.len(), 8);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.trial, i);
            assert!(r.skeleton_ok);
            let bound = r.n as f64 * (r.d_star as f64 + 1.0) * 1e-9 + 1e-9;
            assert!(r.graph_gap_bits <= bound, "{r:?}");
            // exact projection: the parameter gap vanishes
            assert!(r.kl_param_gap_bits.abs() < 1e-9);
        }
    }

    #[test]
    fn row_order_independent_of_jobs() {
        let mut cfg = oracle_cfg(6);
        cfg.mode = ModeKind::Empirical;
        cfg.m = vec![500, 2000];
        cfg.epsilon_prime = Some(0.01);
        cfg.tester_constant = 0.5;
        let serial = run_learn(&cfg).unwrap();
        cfg.jobs = 4;
        let parallel = run_learn(&cfg).unwrap();
        let strip = |rows: Vec<TrialRow>| rows.into_iter().map(|r| TrialRow { runtime_ms: 0, ..r }).collect::<Vec<_>>();
        assert_eq!(strip(serial), strip(parallel));
    }

    #[test]
    fn config_ranges() {
        let mut cfg = oracle_cfg(1);
        cfg.tester_constant = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = oracle_cfg(1);
        cfg.mode = ModeKind::Empirical;
        cfg.m = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
