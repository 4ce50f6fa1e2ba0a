//! Threshold conditional-independence tester.
//!
//! A test reports the (plug-in or exact) conditional mutual information and
//! calls it "large" when it reaches `C * epsilon`. The explicit sample-size
//! bound that makes this reliable is [`required_sample_size`]; it is
//! deliberately conservative (tens of billions of samples for binary pairs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::info::CmiSource;
use crate::model::JointTable;
use crate::sampling::Dataset;

/// Tester constant from the explicit-constant analysis: thresholds at `epsilon / 400`.
pub const DEFAULT_C: f64 = 1.0 / 400.0;

/// Where test statistics come from.
#[derive(Clone, Copy, Debug)]
pub enum TesterMode<'a> {
    /// Plug-in estimates from samples.
    Empirical(&'a Dataset),
    /// Exact values from the true joint (infinite-sample limit).
    Oracle(&'a JointTable),
    /// An empirical distribution that is already tabulated, e.g. from
    /// multinomial counts; statistics are the plug-in values.
    Tabulated(&'a JointTable),
}

impl TesterMode<'_> {
    pub fn n_vars(&self) -> usize {
        match self {
            TesterMode::Empirical(d) => d.n(),
            TesterMode::Oracle(t) | TesterMode::Tabulated(t) => t.n_vars(),
        }
    }

    pub fn cmi(&self, a: &[usize], b: &[usize], z: &[usize]) -> Result<f64> {
        match self {
            TesterMode::Empirical(d) => d.cmi(a, b, z),
            TesterMode::Oracle(t) | TesterMode::Tabulated(t) => t.cmi(a, b, z),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TesterMode::Empirical(_) => "empirical",
            TesterMode::Oracle(_) => "oracle",
            TesterMode::Tabulated(_) => "tabulated",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TesterConfig<'a> {
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: TesterMode<'a>,
}

impl<'a> TesterConfig<'a> {
    pub fn new(c: f64, epsilon: f64, delta: f64, mode: TesterMode<'a>) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!("C = {c} must lie in (0, 1)")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(TesterConfig { c, epsilon, delta, mode })
    }

    pub fn threshold(&self) -> f64 {
        self.c * self.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub estimate: f64,
    pub threshold: f64,
    pub is_large: bool,
}

impl TestVerdict {
    /// Strict comparison `estimate > threshold`.
    pub fn exceeds(&self) -> bool {
        self.estimate > self.threshold
    }
}

/// Tests whether `I(a; b | z)` reaches `C * epsilon`.
pub fn test_cmi(cfg: &TesterConfig<'_>, a: &[usize], b: &[usize], z: &[usize]) -> Result<TestVerdict> {
    let estimate = cfg.mode.cmi(a, b, z)?;
    let threshold = cfg.threshold();
    Ok(TestVerdict { estimate, threshold, is_large: estimate >= threshold })
}

/// Samples sufficient for the tester at accuracy `epsilon`, failure
/// probability `delta`:
///
/// `N = 6.48e6 * s * (ln(S/(eps*delta)) + ln 7.2e5) * ln(12 S^2/delta) / eps`
///
/// where `s = sigma_x * sigma_y * sigma_z` and `S` is the largest of the three
/// cardinalities. Natural logarithms throughout.
pub fn required_sample_size(
    sigma_x: usize,
    sigma_y: usize,
    sigma_z: usize,
    epsilon: f64,
    delta: f64,
) -> Result<u64> {
    if sigma_x == 0 || sigma_y == 0 || sigma_z == 0 {
        return Err(Error::InvalidParameter("cardinalities must be at least 1".into()));
    }
    for (name, x) in [("epsilon", epsilon), ("delta", delta)] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {x} must lie in (0, 1]")));
        }
    }
    let volume = (sigma_x * sigma_y * sigma_z) as f64;
    let widest = sigma_x.max(sigma_y).max(sigma_z) as f64;
    let n = 6.48e6 * volume * ((widest / (epsilon * delta)).ln() + 7.2e5f64.ln())
        * (12.0 * widest * widest / delta).ln()
        / epsilon;
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(Error::InvalidParameter(format!("sample size {n:e} overflows")));
    }
    Ok(n.ceil() as u64)
}
