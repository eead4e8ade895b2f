//! Sample-path rate functionals of the regimes, evaluated on piecewise-linear
//! paths or on finite partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::PiecewiseLinearPath;
use crate::traffic::TrafficModel;

use super::legendre::omega_star;

/// Slopes more negative than this (relative) count as decreasing.
const SLOPE_TOL: f64 = 1e-12;

/// Σ over segments of length · Ω*(slope + λE\[Y\]).
///
/// Paths that fall faster than the mean drift cost +∞; a nonzero tail slope
/// runs forever and costs +∞ too.
pub fn rate_small_buffer_ld(path: &PiecewiseLinearPath, model: &TrafficModel) -> f64 {
    let mean = model.mean_work_rate();
    if let Some(s) = path.tail_slope() {
        if s != 0.0 {
            return f64::INFINITY;
        }
    }
    path.segments()
        .map(|(len, slope)| len * omega_star(model, slope + mean))
        .sum()
}

/// The same integral with an arbitrary local cost in place of Ω*.
pub fn rate_with_local_cost(path: &PiecewiseLinearPath, cost: impl Fn(f64) -> f64) -> f64 {
    path.segments().map(|(len, slope)| len * cost(slope)).sum()
}

/// Σ over segments of length · slope² / (2λE\[Y²\]).
pub fn rate_small_buffer_md(path: &PiecewiseLinearPath, model: &TrafficModel) -> f64 {
    let sigma2 = model.lambda() * model.mark_second_moment();
    if let Some(s) = path.tail_slope() {
        if s != 0.0 {
            return f64::INFINITY;
        }
    }
    path.segments()
        .map(|(len, slope)| len * slope * slope / (2.0 * sigma2))
        .sum()
}

/// Which form of the light-load rate function to evaluate.
///
/// `ValueAtHorizon` charges only what happens before time β − 1:
/// x(β − 1) on paths nondecreasing there. `ScaledIncrease` is the transform
/// obtained from the light-load cumulant limit: (β − 1) times the total
/// increase on paths nondecreasing everywhere. The two agree when β = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LightLoadReading {
    ValueAtHorizon,
    #[default]
    ScaledIncrease,
}

fn nondecreasing(slope: f64) -> bool {
    slope >= -SLOPE_TOL * slope.abs().max(1.0)
}

/// The light-load rate of a path under the chosen reading.
pub fn rate_light_load(
    path: &PiecewiseLinearPath,
    beta: f64,
    reading: LightLoadReading,
) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Usage(format!(
            "the light-load rate needs β > 1, got {beta}"
        )));
    }
    let horizon = beta - 1.0;
    match reading {
        LightLoadReading::ValueAtHorizon => {
            let end = *path.times().last().unwrap();
            if end < horizon {
                return Err(Error::Usage(format!(
                    "path window {end} is shorter than β − 1 = {horizon}"
                )));
            }
            let mut start = 0.0;
            for (len, slope) in path.segments() {
                if start < horizon && !nondecreasing(slope) {
                    return Ok(f64::INFINITY);
                }
                start += len;
            }
            Ok(path.value_at(horizon))
        }
        LightLoadReading::ScaledIncrease => {
            if path.segments().any(|(_, s)| !nondecreasing(s)) {
                return Ok(f64::INFINITY);
            }
            match path.tail_slope() {
                Some(s) if s > 0.0 => return Ok(f64::INFINITY),
                Some(s) if !nondecreasing(s) => return Ok(f64::INFINITY),
                _ => {}
            }
            Ok(horizon * *path.values().last().unwrap())
        }
    }
}

/// A finite partition 0 = j₀ < j₁ < … < j_k ≤ 1 of [0, 1], scaled by a horizon T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
    horizon: f64,
}

impl Partition {
    pub fn new(points: Vec<f64>, horizon: f64) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 {
            return Err(Error::Usage(
                "a partition starts at 0 and has at least one interval".into(),
            ));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) || *points.last().unwrap() > 1.0 {
            return Err(Error::Usage(
                "partition points must increase strictly within [0, 1]".into(),
            ));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Usage(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { points, horizon })
    }

    /// The k-interval uniform partition of [0, 1].
    pub fn uniform(intervals: usize, horizon: f64) -> Result<Self> {
        let k = intervals.max(1);
        Self::new((0..=k).map(|i| i as f64 / k as f64).collect(), horizon)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Real-time lengths T(j_i − j_{i−1}).
    pub fn lengths(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| self.horizon * (w[1] - w[0]))
            .collect()
    }

    /// Real times T·j_i of the partition points after 0.
    pub fn times(&self) -> Vec<f64> {
        self.points[1..].iter().map(|p| self.horizon * p).collect()
    }
}

/// Λ*_{j,T} for independent-increment traffic: Σ_i ℓ_i Ω*(z_i/ℓ_i + λE\[Y\]),
/// where z_i are the centered increments over the partition intervals.
pub fn rate_original_ld_partition(
    increments: &[f64],
    partition: &Partition,
    model: &TrafficModel,
) -> Result<f64> {
    if !model.has_independent_increments() {
        return Err(Error::Unsupported(format!(
            "the partition rate needs independent increments; {} traffic does not have them",
            model.family_name()
        )));
    }
    let lengths = partition.lengths();
    if increments.len() != lengths.len() {
        return Err(Error::Usage(format!(
            "{} increments for a partition with {} intervals",
            increments.len(),
            lengths.len()
        )));
    }
    let mean = model.mean_work_rate();
    Ok(increments
        .iter()
        .zip(&lengths)
        .map(|(z, len)| len * omega_star(model, z / len + mean))
        .sum())
}
