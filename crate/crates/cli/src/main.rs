use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polytree_learn::ci_tester::DEFAULT_C;
use polytree_learn::gadgets::{build_gadget, certify_gadget, GadgetReport};
use polytree_learn::harness::{self, InstanceSource, LearnConfig, ModeKind, Preamble, SkeletonSource};
use polytree_learn::instance::{figure1_fixture_with, random_polytree, InstanceSpec};
use polytree_learn::model::ModelJson;
use polytree_learn::param_fit::SmoothingRule;
use polytree_learn::properties::{run_suite, CheckOutcome, SuiteOptions};
use polytree_learn::sampling::forward_sample;
use polytree_learn::skeleton::check_assumption;
use polytree_learn::{DiscreteBayesNet, RngSeed};

#[derive(Parser)]
#[command(name = "polytree", version, about = "Learn bounded in-degree polytrees and check their guarantees")]
struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, env = "POLYTREE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run learning trials and write one CSV row per trial.
    #[command(allow_negative_numbers = true)]
    Learn(LearnArgs),
    /// Certify the three-variable lower-bound pair at each alpha.
    #[command(allow_negative_numbers = true)]
    CertifyGadget(GadgetArgs),
    /// Evaluate the Chow-Liu edge-gap condition on a model.
    #[command(allow_negative_numbers = true)]
    CheckAssumption(AssumptionArgs),
    /// Generate a model (and optionally samples from it).
    #[command(allow_negative_numbers = true)]
    GenInstance(GenArgs),
    /// Run every named property check with fixed seeds.
    PropertySuite(SuiteArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum InstanceKind {
    Random,
    Figure1,
    File,
}

#[derive(Args, Clone, Serialize)]
struct InstanceArgs {
    /// Where the ground-truth model comes from.
    #[arg(long, value_enum, default_value = "random")]
    instance: InstanceKind,
    /// Model JSON, with `--instance file`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// In-degree bound of generated instances.
    #[arg(long, default_value_t = 3)]
    instance_in_degree: usize,
    #[arg(long, default_value_t = 2)]
    alphabet_size: usize,
    /// Dirichlet parameter for CPT rows.
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    /// Minimum exact MI of every true edge, in bits.
    #[arg(long)]
    min_edge_mi: Option<f64>,
    /// Probability of dropping each tree edge.
    #[arg(long, default_value_t = 0.0)]
    edge_drop: f64,
}

impl InstanceArgs {
    fn source(&self) -> Result<InstanceSource, CliError> {
        match self.instance {
            InstanceKind::Random => {
                let spec = InstanceSpec {
                    n: self.n,
                    d: self.instance_in_degree,
                    alphabet_size: self.alphabet_size,
                    cpt_concentration: self.concentration,
                    min_edge_mi: self.min_edge_mi,
                    edge_drop: self.edge_drop,
                    seed: RngSeed(0),
                };
                spec.validate().map_err(CliError::config)?;
                Ok(InstanceSource::Random { spec })
            }
            InstanceKind::Figure1 => {
                Ok(InstanceSource::Figure1 { concentration: self.concentration, min_edge_mi: self.min_edge_mi })
            }
            InstanceKind::File => {
                let path = self.model.as_ref().ok_or_else(|| CliError::Config("--instance file needs --model".into()))?;
                let bn = load_model(path)?;
                Ok(InstanceSource::Fixed { model: ModelJson::from(&bn) })
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SkeletonArg {
    Given,
    ChowLiu,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Oracle,
    Empirical,
}

#[derive(Args, Serialize)]
struct LearnArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// In-degree bound given to the learner.
    #[arg(long, default_value_t = 3)]
    in_degree_bound: usize,
    /// Target KL accuracy in bits.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Per-test tolerance; defaults to epsilon / (2 n (d + 1)).
    #[arg(long)]
    epsilon_prime: Option<f64>,
    /// Tests call a CMI "large" at tester-constant * epsilon-prime.
    #[arg(long, default_value_t = DEFAULT_C)]
    tester_constant: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Sample sizes, comma separated; each trial runs once per entry.
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "given")]
    skeleton: SkeletonArg,
    /// Drop Chow-Liu pairs with MI below this many bits.
    #[arg(long)]
    prune_below: Option<f64>,
    #[arg(long, value_enum, default_value = "oracle")]
    mode: ModeArg,
    /// Add-kappa smoothing for CPT estimates.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV file name inside the output directory.
    #[arg(long, default_value = "learn.csv")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GadgetArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3,0.4,0.5")]
    alpha: Vec<f64>,
    #[arg(long, default_value = "gadget_report.json")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AssumptionArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "assumption_report.json")]
    out: PathBuf,
    /// Also write the true skeleton as an edge list.
    #[arg(long)]
    edges_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "instance.json")]
    out: PathBuf,
    /// Draw this many samples into `--samples-out`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = "samples.csv")]
    samples_out: PathBuf,
}

#[derive(Args, Serialize)]
struct SuiteArgs {
    #[arg(long, default_value_t = SuiteOptions::default().seed.0)]
    seed: u64,
    /// Negative control: corrupt one CPT row before the row-sum check.
    #[arg(long)]
    inject_corrupt_cpt: bool,
    #[arg(long, default_value = "property_suite.json")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    /// Bad configuration or input; exit code 2.
    Config(String),
    /// A run or check failed; exit code 1.
    Failed(String),
}

impl CliError {
    fn config(e: polytree_learn::Error) -> Self {
        CliError::Config(e.to_string())
    }

    fn failed(e: impl std::fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn load_model(path: &Path) -> Result<DiscreteBayesNet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    DiscreteBayesNet::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn output_path(dir: &Path, name: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::failed)?;
    fs::write(path, text + "\n").map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn instance_from(args: &InstanceArgs, seed: RngSeed) -> Result<DiscreteBayesNet, CliError> {
    let source = args.source()?;
    harness::instance_for_trial(&source, seed).map_err(CliError::failed)
}

fn cmd_learn(dir: &Path, args: &LearnArgs) -> Result<(), CliError> {
    let mut cfg = LearnConfig::new(args.instance.source()?, args.in_degree_bound);
    cfg.epsilon = args.epsilon;
    cfg.epsilon_prime = args.epsilon_prime;
    cfg.tester_constant = args.tester_constant;
    cfg.delta = args.delta;
    cfg.m = args.m.clone();
    cfg.trials = args.trials;
    cfg.seed = RngSeed(args.seed);
    cfg.skeleton = match args.skeleton {
        SkeletonArg::Given => SkeletonSource::Given,
        SkeletonArg::ChowLiu => SkeletonSource::ChowLiu,
    };
    cfg.prune_below = args.prune_below;
    cfg.mode = match args.mode {
        ModeArg::Oracle => ModeKind::Oracle,
        ModeArg::Empirical => ModeKind::Empirical,
    };
    cfg.smoothing = SmoothingRule::new(args.smoothing).map_err(CliError::config)?;
    cfg.jobs = args.jobs;
    cfg.validate().map_err(CliError::config)?;

    let path = output_path(dir, &args.out)?;
    let mut meta = path.clone().into_os_string();
    meta.push(".meta.json");
    write_json(Path::new(&meta), &Preamble::new("learn", &cfg))?;
    let rows = harness::run_learn(&cfg).map_err(CliError::failed)?;
    let file = fs::File::create(&path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    harness::write_csv(&rows, std::io::BufWriter::new(file)).map_err(CliError::failed)?;
    println!("{}", serde_json::to_string(&Preamble::new("learn", &cfg)).map_err(CliError::failed)?);
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct GadgetOutput<'a> {
    preamble: Preamble<&'a GadgetArgs>,
    reports: Vec<GadgetReport>,
    /// `h2(2a) / h2(a)` for every listed pair `(a, 2a)`.
    doubling_ratios: Vec<(f64, f64)>,
    all_checks_pass: bool,
}

fn cmd_certify_gadget(dir: &Path, args: &GadgetArgs) -> Result<bool, CliError> {
    let pairs = args
        .alpha
        .iter()
        .map(|&a| build_gadget(a).map_err(CliError::config))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = pairs.iter().map(|g| certify_gadget(g).map_err(CliError::failed)).collect::<Result<Vec<_>, _>>()?;
    let mut doubling_ratios = Vec::new();
    for r in &reports {
        if let Some(twice) = reports.iter().find(|s| (s.alpha - 2.0 * r.alpha).abs() < 1e-12) {
            doubling_ratios.push((r.alpha, twice.h2 / r.h2));
        }
    }
    let all_checks_pass = reports.iter().all(|r| r.checks.all());
    let out = GadgetOutput { preamble: Preamble::new("certify-gadget", args), reports, doubling_ratios, all_checks_pass };
    write_json(&output_path(dir, &args.out)?, &out)?;
    println!("{}", serde_json::to_string_pretty(&out).map_err(CliError::failed)?);
    Ok(all_checks_pass)
}

#[derive(Serialize)]
struct AssumptionOutput<'a> {
    preamble: Preamble<&'a AssumptionArgs>,
    report: polytree_learn::skeleton::GapReport,
}

fn cmd_check_assumption(dir: &Path, args: &AssumptionArgs) -> Result<bool, CliError> {
    let bn = instance_from(&args.instance, RngSeed(args.seed))?;
    let joint = bn.joint_distribution().map_err(CliError::config)?;
    let report = check_assumption(&joint, bn.graph()).map_err(CliError::failed)?;
    if let Some(edges) = &args.edges_out {
        let path = output_path(dir, edges)?;
        fs::write(&path, bn.graph().skeleton().to_edge_list()).map_err(CliError::failed)?;
    }
    let satisfied = report.satisfied;
    let out = AssumptionOutput { preamble: Preamble::new("check-assumption", args), report };
    write_json(&output_path(dir, &args.out)?, &out)?;
    println!("{}", serde_json::to_string_pretty(&out).map_err(CliError::failed)?);
    Ok(satisfied)
}

fn cmd_gen_instance(dir: &Path, args: &GenArgs) -> Result<(), CliError> {
    let bn = match args.instance.instance {
        // figure1 and random use the seed directly; file just re-emits
        InstanceKind::Figure1 => {
            figure1_fixture_with(RngSeed(args.seed), args.instance.concentration, args.instance.min_edge_mi)
                .map_err(CliError::failed)?
        }
        InstanceKind::Random => {
            let InstanceSource::Random { spec } = args.instance.source()? else { unreachable!() };
            random_polytree(&InstanceSpec { seed: RngSeed(args.seed), ..spec }).map_err(CliError::failed)?
        }
        InstanceKind::File => instance_from(&args.instance, RngSeed(args.seed))?,
    };
    let path = output_path(dir, &args.out)?;
    fs::write(&path, bn.to_json().map_err(CliError::failed)? + "\n").map_err(CliError::failed)?;
    let mut meta = path.clone().into_os_string();
    meta.push(".meta.json");
    write_json(Path::new(&meta), &Preamble::new("gen-instance", args))?;
    println!("wrote model to {}", path.display());
    if let Some(m) = args.samples {
        let data = forward_sample(&bn, m, RngSeed(args.seed).derive(1)).map_err(CliError::failed)?;
        let path = output_path(dir, &args.samples_out)?;
        let file = fs::File::create(&path).map_err(CliError::failed)?;
        data.write_csv(std::io::BufWriter::new(file)).map_err(CliError::failed)?;
        println!("wrote {m} samples to {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SuiteOutput<'a> {
    preamble: Preamble<&'a SuiteArgs>,
    checks: &'a [CheckOutcome],
    passed: usize,
    failed: Vec<&'a str>,
}

fn cmd_property_suite(dir: &Path, args: &SuiteArgs) -> Result<bool, CliError> {
    let opts = SuiteOptions { seed: RngSeed(args.seed), inject_corrupt_cpt: args.inject_corrupt_cpt };
    let checks = run_suite(&opts);
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(lock, "{tag} {} [{} cases] {}", c.name, c.cases, c.detail).map_err(CliError::failed)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    writeln!(lock, "{} of {} checks passed", checks.len() - failed.len(), checks.len()).map_err(CliError::failed)?;
    if !failed.is_empty() {
        writeln!(lock, "failing: {}", failed.join(", ")).map_err(CliError::failed)?;
    }
    let ok = failed.is_empty();
    let out = SuiteOutput { preamble: Preamble::new("property-suite", args), checks: &checks, passed: checks.len() - failed.len(), failed };
    write_json(&output_path(dir, &args.out)?, &out)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dir = cli.out_dir.as_path();
    let result = match &cli.command {
        Command::Learn(a) => cmd_learn(dir, a).map(|_| true),
        Command::CertifyGadget(a) => cmd_certify_gadget(dir, a),
        Command::CheckAssumption(a) => cmd_check_assumption(dir, a),
        Command::GenInstance(a) => cmd_gen_instance(dir, a).map(|_| true),
        Command::PropertySuite(a) => cmd_property_suite(dir, a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
