//! Stationary workload of the N-source queue and its (α, β) rescaling.

use crate::error::{Error, Result};
use crate::traffic::{MarkedPath, TrafficModel};

use super::paths::StepPath;
use super::regime::ScalingRegime;

/// Total service rate NλE\[Y\] + N^β C.
pub fn service_rate(n: u64, regime: &ScalingRegime, lambda_mean_work: f64) -> f64 {
    n as f64 * lambda_mean_work + regime.excess_capacity(n)
}

/// sup_{t ∈ [0, T]} [A(0,t) − (NλE\[Y\] + N^β C) t] over the aggregate window.
///
/// The centered path only rises at events and falls in between, so the
/// supremum is attained at time 0 or just after an event time.
pub fn loynes_queue(
    aggregate: &MarkedPath,
    n: u64,
    regime: &ScalingRegime,
    lambda_mean_work: f64,
) -> f64 {
    let rate = service_rate(n, regime, lambda_mean_work);
    supremum_after_events(aggregate, rate, aggregate.window())
}

/// The Loynes supremum restricted to events at or before `until`.
fn supremum_after_events(aggregate: &MarkedPath, rate: f64, until: f64) -> f64 {
    let events = aggregate.events();
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut i = 0;
    while i < events.len() && events[i].time <= until {
        let t = events[i].time;
        while i < events.len() && events[i].time == t {
            mass += events[i].mark;
            i += 1;
        }
        best = best.max(mass - rate * t);
    }
    best
}

/// Rescales an aggregate path into the regime's natural coordinates:
/// t' ↦ A(0, N^{α−β} t')/N^α − N^{1−β} λE\[Y\] t' on [0, scaled_window].
///
/// Overflow is preserved exactly: f_C of the result exceeds B iff the Loynes
/// queue of the aggregate exceeds N^α B.
pub fn scale_path(
    aggregate: &MarkedPath,
    n: u64,
    regime: &ScalingRegime,
    model: &TrafficModel,
    scaled_window: f64,
) -> Result<StepPath> {
    if n == 0 {
        return Err(Error::Usage("number of sources must be positive".into()));
    }
    if !(scaled_window.is_finite() && scaled_window > 0.0) {
        return Err(Error::Usage(format!(
            "scaled window must be positive, got {scaled_window}"
        )));
    }
    let nf = n as f64;
    let time_scale = regime.time_scale(n);
    let required = time_scale * scaled_window;
    if aggregate.window() < required * (1.0 - 1e-12) {
        return Err(Error::Usage(format!(
            "aggregate window {} is too short: scaled window {scaled_window} needs {required}",
            aggregate.window()
        )));
    }
    let space_scale = nf.powf(regime.alpha);
    let drift = -nf.powf(1.0 - regime.beta) * model.mean_work_rate();
    let jumps = aggregate
        .events()
        .iter()
        .map(|e| {
            (
                (e.time / time_scale).min(scaled_window),
                e.mark / space_scale,
                e.time,
            )
        })
        .take_while(|j| j.2 <= required)
        .map(|j| (j.0, j.1))
        .collect();
    Ok(StepPath::from_sorted(scaled_window, drift, jumps))
}
