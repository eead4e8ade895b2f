use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::{horizon_bound, loynes_queue, service_rate, RegimeCase, ScalingRegime};
use crate::seed::{derive_seed, rng_from_seed, AGGREGATE_STREAM};
use crate::traffic::{sample_poisson_aggregate, TiltWindow, TrafficModel};
use crate::variational::{optimal_tilt, DecayPrediction};

use super::{check_common, replicate, summarize, EstimateMethod, OverflowEstimate};

/// Change of measure for one N: tilt θ on the real-time window [0, window].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltPlan {
    pub theta: f64,
    pub window: f64,
}

/// The tilt that makes the predicted overflow path typical at this N.
///
/// In the small-buffer regimes the optimal scaled path climbs at slope a for
/// scaled time τ*; in real time that is the window N^{α−β}τ* at per-source
/// work rate λE\[Y\] + N^{β−1}a, and θ solves λM'(θ) = that rate. In light load
/// (unit marks) overflow needs j ≥ k = ⌊N^α B⌋ + 1 arrivals before the server
/// drains the excess j − N^α B; the plan is the most likely such j, with the
/// drain time as window and θ making the expected count in it equal to j.
///
/// The estimator itself mixes this plan with neighbouring ones; this is the
/// component with the largest mixture weight.
pub fn tilt_plan(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    prediction: &DecayPrediction,
) -> Result<TiltPlan> {
    let components = mixture(model, n, regime, prediction)?;
    Ok(components
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| c.0)
        .expect("mixtures are never empty"))
}

/// Multiples of τ* covered by the small-buffer mixture, and their weights.
const DURATION_FACTORS: [f64; 5] = [0.5, FRAC_1_SQRT_2, 1.0, SQRT_2, 2.0];
const DURATION_WEIGHTS: [f64; 5] = [0.15, 0.2, 0.3, 0.2, 0.15];

/// Light-load scenarios further than this (in log-probability) from the most
/// likely one are dropped from the mixture.
const SCENARIO_CUTOFF: f64 = 7.0;
const MAX_SCENARIOS: usize = 6;

/// Tilts to sample from, with their mixture probabilities.
///
/// Outside light load this is the single plan. In light load neighbouring
/// arrival counts j can be comparably likely (a count that only just clears
/// the level needs an extremely short window), so every scenario within
/// [`SCENARIO_CUTOFF`] of the best gets a component; half the mass follows the
/// scenario probabilities and half is spread evenly as a defensive floor.
fn mixture(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    prediction: &DecayPrediction,
) -> Result<Vec<(TiltPlan, f64)>> {
    let lambda = model.poisson_rate().ok_or_else(|| {
        Error::Unsupported(format!(
            "importance sampling needs Poisson traffic; {} sources are not supported",
            model.family_name()
        ))
    })?;
    if prediction.regime != *regime {
        return Err(Error::Usage(
            "the prediction was computed for a different regime".into(),
        ));
    }
    let nf = n as f64;
    let mean = model.mean_work_rate();
    match regime.case {
        RegimeCase::SmallBufferLd | RegimeCase::SmallBufferMd => {
            let tau = prediction.optimal_duration.ok_or_else(|| {
                Error::Unsupported(
                    "the prediction has no attained optimal path to tilt towards".into(),
                )
            })?;
            // Overflow at finite N need not happen exactly at τ*, so nearby
            // durations get components too, each tilted to the straight line
            // that reaches B at its own duration.
            DURATION_FACTORS
                .iter()
                .zip(DURATION_WEIGHTS)
                .map(|(&f, w)| {
                    let tau = tau * f;
                    let slope = (regime.buffer + regime.capacity * tau) / tau;
                    let rate = mean + nf.powf(regime.beta - 1.0) * slope;
                    let plan = TiltPlan {
                        theta: optimal_tilt(model, rate)?,
                        window: regime.time_scale(n) * tau,
                    };
                    Ok((plan, w))
                })
                .collect()
        }
        RegimeCase::LightLoad => {
            if !model.marks.is_unit() {
                return Err(Error::Unsupported(
                    "light-load importance sampling needs unit marks".into(),
                ));
            }
            let level = regime.buffer_level(n);
            let drain = service_rate(n, regime, mean);
            let first = level.floor() as u64 + 1;
            let mut ln_factorial: f64 = (2..first).map(|i| (i as f64).ln()).sum();
            let mut scenarios = Vec::new();
            for j in first..first + MAX_SCENARIOS as u64 {
                ln_factorial += (j as f64).ln();
                let jf = j as f64;
                let window = (jf - level) / drain;
                let expected = nf * lambda * window;
                let log_p = jf * expected.ln() - ln_factorial - expected;
                let theta = (jf / expected).ln().max(0.0);
                scenarios.push((TiltPlan { theta, window }, log_p));
            }
            let best = scenarios
                .iter()
                .map(|s| s.1)
                .fold(f64::NEG_INFINITY, f64::max);
            scenarios.retain(|s| s.1 >= best - SCENARIO_CUTOFF);
            let total: f64 = scenarios.iter().map(|s| (s.1 - best).exp()).sum();
            let even = 1.0 / scenarios.len() as f64;
            Ok(scenarios
                .into_iter()
                .map(|(plan, log_p)| (plan, 0.5 * (log_p - best).exp() / total + 0.5 * even))
                .collect())
        }
        case => Err(Error::Unsupported(format!(
            "importance sampling is not available in the {case} regime"
        ))),
    }
}

/// Importance-sampled estimate of P(Q > N^α B) for Poisson traffic.
///
/// Replications sample the aggregate with rate NλM(θ) and tilted marks on
/// [0, w], nominal afterwards, and weight overflow by the likelihood ratio
/// exp(−θA(0,w) + Nλ(M(θ) − 1)w). With θ = 0 this is the naive estimator on the
/// same random numbers. When several tilts are mixed, each replication picks
/// one and is weighted by the ratio to the whole mixture.
pub fn estimate_is(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    prediction: &DecayPrediction,
    replications: u64,
    seed: u64,
    tail_budget: f64,
) -> Result<OverflowEstimate> {
    model.validate()?;
    check_common(n, replications, tail_budget)?;
    let components = mixture(model, n, regime, prediction)?;
    estimate_with_mixture(
        model,
        n,
        regime,
        &components,
        replications,
        seed,
        tail_budget,
    )
}

/// [`estimate_is`] with one explicit tilt.
#[cfg(test)]
fn estimate_is_with_plan(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    plan: TiltPlan,
    replications: u64,
    seed: u64,
    tail_budget: f64,
) -> Result<OverflowEstimate> {
    estimate_with_mixture(
        model,
        n,
        regime,
        &[(plan, 1.0)],
        replications,
        seed,
        tail_budget,
    )
}

fn estimate_with_mixture(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    components: &[(TiltPlan, f64)],
    replications: u64,
    seed: u64,
    tail_budget: f64,
) -> Result<OverflowEstimate> {
    let lambda = model
        .poisson_rate()
        .ok_or_else(|| Error::Unsupported("importance sampling needs Poisson traffic".into()))?;
    let horizon = horizon_bound(model, n, regime, tail_budget)?;
    let longest = components.iter().map(|c| c.0.window).fold(0.0, f64::max);
    let window = horizon.window.max(longest);
    let mean = model.mean_work_rate();
    let level = regime.buffer_level(n);
    let nl = n as f64 * lambda;
    // ln π_j − Nλ(M(θ_j) − 1)w_j: the path-independent part of ln dQ_j/dP.
    let offsets: Vec<f64> = components
        .iter()
        .map(|(p, pi)| pi.ln() - nl * model.marks.log_mgf(p.theta).exp_m1() * p.window)
        .collect();
    let cumulative: Vec<f64> = components
        .iter()
        .map(|c| c.1)
        .scan(0.0, |acc, pi| {
            *acc += pi;
            Some(*acc)
        })
        .collect();
    let weights = replicate(replications, |rep| {
        let mut rng = rng_from_seed(derive_seed(seed, AGGREGATE_STREAM, rep));
        let pick = if components.len() > 1 {
            let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
            cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(components.len() - 1)
        } else {
            0
        };
        let plan = components[pick].0;
        let tilt = TiltWindow {
            theta: plan.theta,
            window: plan.window,
        };
        let (path, tilted_mass) = sample_poisson_aggregate(model, n, window, Some(tilt), &mut rng)?;
        if loynes_queue(&path, n, regime, mean) <= level {
            return Ok(0.0);
        }
        if components.len() == 1 {
            return Ok(if plan.theta == 0.0 {
                1.0
            } else {
                (-plan.theta * tilted_mass - offsets[0]).exp()
            });
        }
        let logs: Vec<f64> = components
            .iter()
            .zip(&offsets)
            .map(|((p, _), off)| p.theta * path.cumulative(p.window) + off)
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        Ok((-top - sum.ln()).exp())
    })?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Instability(
            "a likelihood ratio overflowed; the tilt is too strong for this N".into(),
        ));
    }
    let report = components
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| c.0)
        .expect("mixtures are never empty");
    Ok(summarize(
        n,
        regime,
        &weights,
        EstimateMethod::ImportanceSampled {
            tilt_theta: report.theta,
            tilt_window: report.window,
        },
        window,
        tail_budget,
    ))
}
