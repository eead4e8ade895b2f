//! Queueing quantities of the N-source system: regimes, paths, the Loynes
//! workload, the queueing map and the certified simulation horizon.

mod horizon;
mod loynes;
mod paths;
mod regime;

pub use horizon::{
    horizon_bound, horizon_bound_iterative, horizon_bound_with, Horizon, DEFAULT_DELTA_FRACTION,
};
pub use loynes::{loynes_queue, scale_path, service_rate};
pub use paths::{
    polygonal, queueing_map, scaled_uniform_norm, PiecewiseLinearPath, SamplePath, StepPath,
};
pub use regime::{classify_case, RegimeCase, ScalingRegime};
