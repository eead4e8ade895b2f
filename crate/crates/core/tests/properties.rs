//! Randomized and statistical properties of the simulation pipeline.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smallbuf::{
    decay_regression, estimate_naive, estimate_naive_thresholds, horizon_bound, loynes_queue,
    polygonal, queueing_map, sample_aggregate, sample_path, scale_path, EstimateMethod, MarkLaw,
    OverflowEstimate, ScalingRegime, TrafficModel,
};

fn unit_poisson() -> TrafficModel {
    TrafficModel::poisson(1.0, MarkLaw::Unit).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overflow_is_preserved_by_scaling(
        seed in any::<u64>(),
        n in 1u64..64,
        alpha in 0.3f64..1.0,
        beta in 0.5f64..2.0,
        buffer in 0.0f64..2.0,
        capacity in 0.1f64..2.0,
    ) {
        let model = TrafficModel::poisson(1.0, MarkLaw::Exponential { mean: 0.8 }).unwrap();
        let regime = ScalingRegime::new(alpha, beta, buffer, capacity).unwrap();
        let scaled_window = 3.0;
        let window = regime.time_scale(n) * scaled_window;
        let agg = sample_aggregate(&model, n, window, seed, 0).unwrap();
        let scaled = scale_path(&agg, n, &regime, &model, scaled_window).unwrap();
        let q = loynes_queue(&agg, n, &regime, model.mean_work_rate());
        prop_assert_eq!(
            queueing_map(&scaled, capacity) > buffer,
            q > regime.buffer_level(n)
        );
        // The scaled queue is the real one divided by N^α.
        let fq = queueing_map(&scaled, capacity);
        prop_assert!((fq - q / (n as f64).powf(alpha)).abs() <= 1e-9 * (1.0 + fq));
    }

    #[test]
    fn polygonal_interpolation_never_raises_the_queue(seed in any::<u64>(), capacity in 0.1f64..3.0) {
        let model = unit_poisson();
        let regime = ScalingRegime::new(1.0, 1.0, 0.0, capacity).unwrap();
        let agg = sample_aggregate(&model, 4, 5.0, seed, 1).unwrap();
        let step = scale_path(&agg, 4, &regime, &model, 5.0).unwrap();
        let poly = polygonal(&step);
        prop_assert!(queueing_map(&poly, capacity) <= queueing_map(&step, capacity) + 1e-12);
    }
}

#[test]
fn poisson_counts_concentrate() {
    let model = unit_poisson();
    let good = (0..200u64)
        .filter(|&s| {
            let path = sample_path(&model, 1e4, s).unwrap();
            (path.len() as f64 / 1e4 - 1.0).abs() <= 3e-2
        })
        .count();
    assert!(good >= 198, "{good} of 200 seeds within tolerance");
}

#[test]
fn deterministic_renewal_first_event_is_uniform() {
    use smallbuf::{InterArrival, ProcessFamily};
    let model = TrafficModel::new(
        ProcessFamily::Renewal {
            interarrival: InterArrival::Deterministic { period: 1.0 },
        },
        MarkLaw::Unit,
    )
    .unwrap();
    let mut bins = [0u32; 10];
    for s in 0..5000u64 {
        let path = sample_path(&model, 5.0, s).unwrap();
        assert!(path.len() == 5 || path.len() == 6);
        let first = path.events()[0].time;
        assert!(first > 0.0 && first <= 1.0);
        bins[((first * 10.0) as usize).min(9)] += 1;
    }
    // Chi-square with 9 degrees of freedom; 27.9 is the 0.999 quantile.
    let chi2: f64 = bins
        .iter()
        .map(|&b| (b as f64 - 500.0).powi(2) / 500.0)
        .sum();
    assert!(chi2 < 27.9, "chi-square {chi2}, bins {bins:?}");
}

#[test]
fn estimates_are_bit_reproducible() {
    let regime = ScalingRegime::new(0.5, 1.0, 0.5, 1.0).unwrap();
    let a = estimate_naive(&unit_poisson(), 16, &regime, 500, 42, 1e-9).unwrap();
    let b = estimate_naive(&unit_poisson(), 16, &regime, 500, 42, 1e-9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn threshold_sweep_is_monotone_per_replication() {
    let regime = ScalingRegime::new(0.5, 1.0, 0.0, 1.0).unwrap();
    let buffers = [0.0, 0.1, 0.25, 0.5, 1.0];
    let ests =
        estimate_naive_thresholds(&unit_poisson(), 16, &regime, &buffers, 2000, 3, 1e-9).unwrap();
    for w in ests.windows(2) {
        assert!(w[1].hits <= w[0].hits);
    }
}

#[test]
fn doubling_replications_shrinks_the_standard_error() {
    let regime = ScalingRegime::new(0.5, 1.0, 0.5, 1.0).unwrap();
    let mut ratios = Vec::new();
    for trial in 0..20u64 {
        let small = estimate_naive(&unit_poisson(), 16, &regime, 1000, 2 * trial, 1e-9).unwrap();
        let large =
            estimate_naive(&unit_poisson(), 16, &regime, 2000, 2 * trial + 1, 1e-9).unwrap();
        ratios.push(large.std_error / small.std_error);
    }
    for r in &ratios {
        assert!((0.6..=0.85).contains(r), "ratio {r}; all {ratios:?}");
    }
}

#[test]
fn tighter_budget_changes_the_estimate_within_error() {
    let regime = ScalingRegime::new(0.5, 1.0, 0.5, 1.0).unwrap();
    let loose = estimate_naive(&unit_poisson(), 16, &regime, 4000, 8, 1e-3).unwrap();
    let tight = estimate_naive(&unit_poisson(), 16, &regime, 4000, 8, 1e-4).unwrap();
    let longer = horizon_bound(&unit_poisson(), 16, &regime, 1e-4)
        .unwrap()
        .window;
    assert!(longer >= loose.horizon_used);
    let diff = (loose.probability - tight.probability).abs();
    assert!(diff <= (1e-3 - 1e-4) + 3.0 * loose.std_error.max(tight.std_error));
}

#[test]
fn regression_tolerates_multiplicative_noise() {
    let regime = ScalingRegime::new(0.6, 0.8, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let estimates: Vec<OverflowEstimate> = [64u64, 128, 256, 512, 1024]
        .iter()
        .map(|&n| {
            let f = regime.speed(n as f64).unwrap();
            let noise = 1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0);
            let p = (-2.0 * f).exp() * noise;
            OverflowEstimate {
                n,
                regime,
                probability: p,
                std_error: 0.05 * p,
                ci_low: 0.9 * p,
                ci_high: 1.1 * p,
                replications: 1000,
                hits: 1000,
                effective_sample_size: 1000.0,
                normalized_log: Some(p.ln() / f),
                method: EstimateMethod::Naive,
                horizon_used: 1.0,
                tail_budget: 1e-9,
            }
        })
        .collect();
    let fit = decay_regression(&estimates, &regime).unwrap();
    assert!(
        (fit.fitted_decay - 2.0).abs() <= 0.2,
        "slope {}",
        fit.fitted_decay
    );
}
