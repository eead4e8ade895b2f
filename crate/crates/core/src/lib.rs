//! Many-sources queueing with buffers that shrink with the number of sources.
//!
//! The crate covers four layers:
//!
//! * [`traffic`] — stationary marked point-process sources and their aggregates;
//! * [`queue`] — scaling regimes, Loynes queue lengths, path spaces and the
//!   simulation horizon;
//! * [`ratefn`] — scaled cumulant generating functions, Legendre transforms,
//!   sample-path rate functionals and the runtime checks on the traffic;
//! * [`variational`] and [`estimate`] — predicted decay rates and Monte Carlo
//!   estimators (naive and importance sampling) with decay-rate regression.

// Parameter checks are written as `!(x > 0.0)` on purpose: they must also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod optimize;
pub mod queue;
pub mod ratefn;
pub mod seed;
pub mod traffic;
pub mod variational;

pub use error::{Error, Result};
pub use estimate::{
    decay_regression, estimate_is, estimate_naive, estimate_naive_thresholds, DecayFit,
    EstimateMethod, OverflowEstimate,
};
pub use queue::{
    horizon_bound, loynes_queue, polygonal, queueing_map, scale_path, scaled_uniform_norm, Horizon,
    PiecewiseLinearPath, RegimeCase, SamplePath, ScalingRegime, StepPath,
};
pub use ratefn::{
    assumption_diagnostics, covariance_grid, log_mgf_arrivals, omega_star, psi, rate_light_load,
    rate_original_ld_partition, rate_rkhs, rate_small_buffer_ld, rate_small_buffer_md,
    CovarianceGrid, DiagnosticsReport, EvalMode, LightLoadReading, Partition, ProbeGrid, Verdict,
};
pub use seed::{derive_seed, rng_from_seed};
pub use traffic::{
    mark_mgf, sample_aggregate, sample_path, superpose, Event, InterArrival, MarkLaw, MarkedPath,
    ProcessFamily, TrafficModel,
};
pub use variational::{classify, decay_rate, optimal_tilt, DecayPrediction, PredictionMethod};
