//! Monte Carlo estimates of P(Q > N^α B) and their decay-rate regression.
//!
//! Replication r of any estimator draws its randomness from a stream keyed by
//! (seed, r) alone. Replications run in parallel but are reduced in index
//! order, so results are bit-identical for any thread count.

mod importance;
mod naive;
mod regression;

pub use importance::{estimate_is, tilt_plan, TiltPlan};
pub use naive::{estimate_naive, estimate_naive_thresholds};
pub use regression::{decay_regression, DecayFit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::ScalingRegime;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Fewest replications an estimator accepts.
pub const MIN_REPLICATIONS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimateMethod {
    Naive,
    /// Exponential tilt θ applied on the real-time window [0, tilt_window].
    ImportanceSampled {
        tilt_theta: f64,
        tilt_window: f64,
    },
}

impl EstimateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateMethod::Naive => "naive",
            EstimateMethod::ImportanceSampled { .. } => "importance_sampled",
        }
    }

    pub fn tilt_theta(&self) -> Option<f64> {
        match self {
            EstimateMethod::Naive => None,
            EstimateMethod::ImportanceSampled { tilt_theta, .. } => Some(*tilt_theta),
        }
    }
}

/// An overflow probability estimate at one N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverflowEstimate {
    pub n: u64,
    pub regime: ScalingRegime,
    pub probability: f64,
    pub std_error: f64,
    /// 95% interval; with no hits the upper end is the rule-of-three bound 3/R.
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: u64,
    /// Replications that overflowed.
    pub hits: u64,
    /// (Σw)²/Σw² over overflowing replications; equals `hits` for the naive estimator.
    pub effective_sample_size: f64,
    /// ln(probability)/f(N), when the probability is positive and the regime has a speed.
    pub normalized_log: Option<f64>,
    pub method: EstimateMethod,
    /// Real-time window simulated per replication.
    pub horizon_used: f64,
    pub tail_budget: f64,
}

pub(crate) fn check_common(n: u64, replications: u64, tail_budget: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("number of sources must be positive".into()));
    }
    if replications < MIN_REPLICATIONS {
        return Err(Error::Usage(format!(
            "at least {MIN_REPLICATIONS} replications are required, got {replications}"
        )));
    }
    if !(tail_budget > 0.0 && tail_budget < 1.0) {
        return Err(Error::Usage(format!(
            "tail budget must lie in (0, 1), got {tail_budget}"
        )));
    }
    Ok(())
}

/// Runs `f` for every replication index in parallel, returning results in index order.
pub(crate) fn replicate<T, F>(replications: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..replications).into_par_iter().map(&f).collect()
}

/// Assembles an estimate from per-replication weights (1 for naive hits).
pub(crate) fn summarize(
    n: u64,
    regime: &ScalingRegime,
    weights: &[f64],
    method: EstimateMethod,
    horizon_used: f64,
    tail_budget: f64,
) -> OverflowEstimate {
    let r = weights.len() as f64;
    let hits = weights.iter().filter(|w| **w > 0.0).count() as u64;
    // Importance weights can be far below 1e-154, where squares underflow, so
    // moments are taken of the weights relative to the largest one.
    let scale = weights.iter().copied().fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let (s1, s2) = weights.iter().fold((0.0, 0.0), |(a, b), w| {
        let v = w / scale;
        (a + v, b + v * v)
    });
    let probability = s1 / r * scale;
    let (std_error, ci_low, ci_high) = if hits == 0 {
        let upper = 3.0 / r;
        (upper / Z95, 0.0, upper)
    } else {
        let mean = s1 / r;
        let var = ((s2 / r - mean * mean) * r / (r - 1.0)).max(0.0);
        let se = (var / r).sqrt() * scale;
        (
            se,
            (probability - Z95 * se).max(0.0),
            probability + Z95 * se,
        )
    };
    let ci_high = match method {
        EstimateMethod::Naive => ci_high.min(1.0),
        _ => ci_high,
    };
    let effective_sample_size = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    let normalized_log = if probability > 0.0 {
        regime.speed(n as f64).map(|f| probability.ln() / f)
    } else {
        None
    };
    OverflowEstimate {
        n,
        regime: *regime,
        probability,
        std_error,
        ci_low,
        ci_high,
        replications: weights.len() as u64,
        hits,
        effective_sample_size,
        normalized_log,
        method,
        horizon_used,
        tail_budget,
    }
}
