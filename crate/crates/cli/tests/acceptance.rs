//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every verdict is printed; exits nonzero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use polytree_learn::gadgets::{build_gadget, certify_gadget};
use polytree_learn::harness::{median, run_learn, InstanceSource, LearnConfig, ModeKind};
use polytree_learn::properties::{
    eq1_equivalence, gadget_atoms, gadget_certificates, lemma12_identity, lemma13_parent_identities, oracle_pipeline,
    skeleton_recovery, tensorization, tester_calibration, CheckOutcome,
};
use polytree_learn::RngSeed;

const ALPHAS: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

struct Verdict {
    passed: bool,
    detail: String,
}

fn combine(checks: &[CheckOutcome]) -> Verdict {
    Verdict {
        passed: checks.iter().all(|c| c.passed),
        detail: checks
            .iter()
            .map(|c| format!("{} {} [{}]: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.cases, c.detail))
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let elapsed = start.elapsed();
    v.detail += &format!(" | {:.1} s", elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            v.passed = false;
            v.detail += &format!(" exceeds {} s", limit.as_secs());
        }
    }
    v
}

fn criterion1() -> Verdict {
    timed(Some(Duration::from_secs(60)), || combine(&[eq1_equivalence(100, 5, RngSeed(101))]))
}

fn criterion2() -> Verdict {
    timed(None, || combine(&[lemma12_identity(200, RngSeed(201)), lemma13_parent_identities(100, RngSeed(202))]))
}

fn criterion3() -> Verdict {
    timed(Some(Duration::from_secs(300)), || {
        let checks = oracle_pipeline(100, RngSeed(301));
        // soundness of Phases 1-2 and the score bound
        combine(&checks[..2])
    })
}

fn criterion4() -> Verdict {
    timed(None, || {
        let mut cfg =
            LearnConfig::new(InstanceSource::Figure1 { concentration: 1.0, min_edge_mi: Some(0.05) }, 3);
        cfg.mode = ModeKind::Empirical;
        cfg.m = vec![1_000, 10_000, 100_000];
        cfg.trials = 50;
        // threshold C * eps' = 0.01 bits, above plug-in noise at m = 1e3
        cfg.tester_constant = 0.5;
        cfg.epsilon_prime = Some(0.02);
        cfg.seed = RngSeed(401);
        cfg.jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let rows = match run_learn(&cfg) {
            Ok(r) => r,
            Err(e) => return Verdict { passed: false, detail: format!("error: {e}") },
        };
        let medians: Vec<f64> = cfg
            .m
            .iter()
            .map(|&m| median(&mut rows.iter().filter(|r| r.m == m).map(|r| r.kl_total_bits).collect::<Vec<_>>()))
            .collect();
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        let small = medians[2] <= 0.1;
        Verdict {
            passed: decreasing && small,
            detail: format!(
                "median KL (bits) at m = 1e3, 1e4, 1e5: {:.4e}, {:.4e}, {:.4e}; strictly decreasing {decreasing}; \
                 final <= 0.1 {small}",
                medians[0], medians[1], medians[2]
            ),
        }
    })
}

fn criterion5() -> Verdict {
    timed(None, || combine(&[tester_calibration(200, RngSeed(501))]))
}

fn criterion6() -> Verdict {
    // chain and tree classes, 25 instances each, 4 seeds per instance:
    // 50 instances and 100 trials per class
    timed(Some(Duration::from_secs(300)), || combine(&skeleton_recovery(25, 4, RngSeed(601))))
}

fn criterion7() -> Verdict {
    timed(None, || {
        let mut checks = vec![gadget_atoms(&ALPHAS), gadget_certificates(&ALPHAS)];
        let h2: Vec<f64> = ALPHAS.iter().map(|&a| certify_gadget(&build_gadget(a).unwrap()).unwrap().h2).collect();
        let mut ratios = Vec::new();
        let mut in_band = true;
        for (i, &a) in ALPHAS.iter().enumerate() {
            if let Some(j) = ALPHAS.iter().position(|&b| (b - 2.0 * a).abs() < 1e-12) {
                let r = h2[j] / h2[i];
                in_band &= r > 3.5 && r < 4.5;
                ratios.push(format!("h2({})/h2({a}) = {r:.4}", ALPHAS[j]));
            }
        }
        checks.push(CheckOutcome {
            name: "h2 doubling ratios in (3.5, 4.5)".into(),
            passed: in_band,
            cases: ratios.len(),
            detail: ratios.join(", "),
        });
        combine(&checks)
    })
}

fn criterion8() -> Verdict {
    timed(None, || combine(&ALPHAS.iter().map(|&a| tensorization(a, &[2, 3])).collect::<Vec<_>>()))
}

fn criterion9() -> Verdict {
    timed(Some(Duration::from_secs(600)), || {
        let dir = std::env::temp_dir().join(format!("polytree-acceptance-{}", std::process::id()));
        let out = Command::new(env!("CARGO_BIN_EXE_polytree"))
            .arg("property-suite")
            .env("POLYTREE_OUT_DIR", &dir)
            .output();
        let _ = std::fs::remove_dir_all(&dir);
        match out {
            Err(e) => Verdict { passed: false, detail: format!("could not run: {e}") },
            Ok(o) => {
                let stdout = String::from_utf8_lossy(&o.stdout);
                let summary = stdout.lines().rev().find(|l| l.contains("checks passed")).unwrap_or("no summary");
                Verdict { passed: o.status.code() == Some(0), detail: format!("exit {:?}; {summary}", o.status.code()) }
            }
        }
    })
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("KL equals MI-score difference", criterion1),
        ("MI decomposition identities", criterion2),
        ("oracle pipeline soundness and score bound", criterion3),
        ("finite-sample KL over sample sizes", criterion4),
        ("tester calibration at the required sample size", criterion5),
        ("Chow-Liu skeleton recovery", criterion6),
        ("gadget certificate", criterion7),
        ("KL tensorization", criterion8),
        ("property suite command", criterion9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        failed += !v.passed as usize;
        println!("{} criterion {} ({name}): {}", if v.passed { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
