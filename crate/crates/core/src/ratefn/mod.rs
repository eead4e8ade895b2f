//! Cumulants, Legendre transforms and rate functionals.

mod cumulant;
mod diagnostics;
mod functionals;
mod legendre;
mod rkhs;

pub use cumulant::{
    cumulant_source, log_mgf_arrivals, AnalyticCumulant, CumulantEstimate, EvalMode, LogMgfSource,
    MonteCarloCumulant,
};
pub use diagnostics::{
    assumption_diagnostics, assumption_diagnostics_with, Check, CheckResult, DiagnosticsReport,
    Probe, ProbeGrid, Verdict,
};
pub use functionals::{
    rate_light_load, rate_original_ld_partition, rate_small_buffer_ld, rate_small_buffer_md,
    rate_with_local_cost, LightLoadReading, Partition,
};
pub use legendre::{
    omega_star, omega_star_maximizer, omega_star_numeric, psi, psi_maximizer, psi_with,
};
pub use rkhs::{covariance_grid, rate_rkhs, CovarianceGrid};
