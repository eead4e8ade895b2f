use crate::error::{Error, Result};
use crate::queue::{horizon_bound, loynes_queue, ScalingRegime};
use crate::seed::{derive_seed, rng_from_seed, AGGREGATE_STREAM};
use crate::traffic::{sample_aggregate, sample_poisson_aggregate, MarkedPath, TrafficModel};

use super::{check_common, replicate, summarize, EstimateMethod, OverflowEstimate};

/// Samples replication `rep` of the N-source aggregate on `[0, window]`.
///
/// Poisson traffic uses the same stream as the importance sampler, so the two
/// estimators share random numbers.
pub(super) fn aggregate_replication(
    model: &TrafficModel,
    n: u64,
    window: f64,
    seed: u64,
    rep: u64,
) -> Result<MarkedPath> {
    if model.poisson_rate().is_some() {
        let mut rng = rng_from_seed(derive_seed(seed, AGGREGATE_STREAM, rep));
        Ok(sample_poisson_aggregate(model, n, window, None, &mut rng)?.0)
    } else {
        sample_aggregate(model, n, window, seed, rep)
    }
}

/// Crude Monte Carlo: the fraction of stationary windows whose Loynes queue
/// exceeds N^α B, over a horizon certified to `tail_budget`.
pub fn estimate_naive(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    replications: u64,
    seed: u64,
    tail_budget: f64,
) -> Result<OverflowEstimate> {
    let mut out = estimate_naive_thresholds(
        model,
        n,
        regime,
        &[regime.buffer],
        replications,
        seed,
        tail_budget,
    )?;
    Ok(out.remove(0))
}

/// Naive estimates for several buffer constants from the same replications.
///
/// Each replication's queue is compared with every threshold, so the
/// estimates are exactly nonincreasing in B. The window is the longest of the
/// per-threshold horizons, which keeps every estimate certified.
pub fn estimate_naive_thresholds(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    buffers: &[f64],
    replications: u64,
    seed: u64,
    tail_budget: f64,
) -> Result<Vec<OverflowEstimate>> {
    model.validate()?;
    check_common(n, replications, tail_budget)?;
    if buffers.is_empty() {
        return Err(Error::Usage("no buffer thresholds given".into()));
    }
    let regimes = buffers
        .iter()
        .map(|b| regime.with_buffer(*b))
        .collect::<Result<Vec<_>>>()?;
    let mut window: f64 = 0.0;
    for r in &regimes {
        window = window.max(horizon_bound(model, n, r, tail_budget)?.window);
    }
    let mean = model.mean_work_rate();
    let queues = replicate(replications, |rep| {
        let path = aggregate_replication(model, n, window, seed, rep)?;
        Ok(loynes_queue(&path, n, regime, mean))
    })?;
    Ok(regimes
        .iter()
        .map(|r| {
            let level = r.buffer_level(n);
            let weights: Vec<f64> = queues
                .iter()
                .map(|q| if *q > level { 1.0 } else { 0.0 })
                .collect();
            summarize(n, r, &weights, EstimateMethod::Naive, window, tail_budget)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{InterArrival, MarkLaw, ProcessFamily};

    fn unit_poisson() -> TrafficModel {
        TrafficModel::poisson(1.0, MarkLaw::Unit).unwrap()
    }

    #[test]
    fn reproducible_and_exact_frequency() {
        let r = ScalingRegime::new(0.5, 1.0, 0.5, 1.0).unwrap();
        let a = estimate_naive(&unit_poisson(), 16, &r, 2000, 7, 1e-9).unwrap();
        let b = estimate_naive(&unit_poisson(), 16, &r, 2000, 7, 1e-9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.probability, a.hits as f64 / 2000.0);
        assert!(a.hits > 0);
    }

    #[test]
    fn thresholds_are_monotone() {
        let r = ScalingRegime::new(0.5, 1.0, 0.5, 1.0).unwrap();
        let est = estimate_naive_thresholds(
            &unit_poisson(),
            16,
            &r,
            &[0.1, 0.25, 0.5, 1.0, 2.0],
            3000,
            1,
            1e-9,
        )
        .unwrap();
        for w in est.windows(2) {
            assert!(w[1].hits <= w[0].hits);
        }
    }

    #[test]
    fn huge_buffer_gives_zero_with_rule_of_three() {
        let r = ScalingRegime::new(0.5, 1.0, 50.0, 1.0).unwrap();
        let e = estimate_naive(&unit_poisson(), 16, &r, 500, 3, 1e-6).unwrap();
        assert_eq!(e.hits, 0);
        assert_eq!(e.ci_high, 3.0 / 500.0);
    }

    #[test]
    fn dependent_traffic_runs_by_superposition() {
        let model = TrafficModel::new(
            ProcessFamily::Renewal {
                interarrival: InterArrival::Erlang {
                    shape: 2,
                    mean: 1.0,
                },
            },
            MarkLaw::Unit,
        )
        .unwrap();
        let r = ScalingRegime::new(0.5, 1.0, 0.25, 1.0).unwrap();
        let e = estimate_naive(&model, 8, &r, 400, 5, 1e-6).unwrap();
        assert!(e.probability > 0.0 && e.probability < 1.0);
    }

    #[test]
    fn too_few_replications_is_a_usage_error() {
        let r = ScalingRegime::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            estimate_naive(&unit_poisson(), 4, &r, 99, 0, 1e-6),
            Err(Error::Usage(_))
        ));
    }
}
