//! Sample paths: jump paths with linear drift, and piecewise-linear paths.
//!
//! Both kinds are described exactly by finitely many numbers, so the queueing
//! map and the scaled uniform norm are evaluated in closed form by scanning
//! breakpoints rather than sampling a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operations shared by the two path types.
pub trait SamplePath {
    /// Right end of the window on which the path is known.
    fn window(&self) -> f64;

    /// x(t) for t in [0, window] (right-continuous).
    fn value(&self, t: f64) -> f64;

    /// f_C(x) = sup_{t > 0} (x(t) − Ct), always ≥ 0.
    fn queueing_map(&self, capacity: f64) -> f64;

    /// sup_t |x(t)| / (1 + t).
    fn scaled_uniform_norm(&self) -> f64;
}

/// f_C(x) for any path type.
pub fn queueing_map(path: &dyn SamplePath, capacity: f64) -> f64 {
    path.queueing_map(capacity)
}

/// The scaled uniform norm sup_t |x(t)|/(1+t) for any path type.
pub fn scaled_uniform_norm(path: &dyn SamplePath) -> f64 {
    path.scaled_uniform_norm()
}

/// Right-continuous path x(t) = drift·t + Σ_{τ_i ≤ t} ζ_i on [0, window].
///
/// The drift is carried as a number rather than sampled, so suprema are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    window: f64,
    drift: f64,
    /// (time, size) pairs, times nondecreasing in (0, window].
    jumps: Vec<(f64, f64)>,
}

impl StepPath {
    pub fn new(window: f64, drift: f64, jumps: Vec<(f64, f64)>) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Usage(format!(
                "window must be positive, got {window}"
            )));
        }
        if !drift.is_finite() {
            return Err(Error::Usage(format!("drift must be finite, got {drift}")));
        }
        let mut prev = 0.0;
        for &(t, z) in &jumps {
            if !(t > 0.0 && t <= window && t >= prev && z.is_finite()) {
                return Err(Error::Usage(format!(
                    "jump ({t}, {z}) is out of order or outside (0, {window}]"
                )));
            }
            prev = t;
        }
        Ok(Self {
            window,
            drift,
            jumps,
        })
    }

    pub(crate) fn from_sorted(window: f64, drift: f64, jumps: Vec<(f64, f64)>) -> Self {
        Self {
            window,
            drift,
            jumps,
        }
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    /// Largest single jump in absolute value (0 without jumps).
    pub fn max_jump(&self) -> f64 {
        self.jumps.iter().map(|j| j.1.abs()).fold(0.0, f64::max)
    }

    /// x(t−).
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.0 < t);
        self.drift * t + self.jumps[..k].iter().map(|j| j.1).sum::<f64>()
    }

    /// Visits (time, value before, value after) at every distinct jump time,
    /// then the window end.
    fn scan(&self, mut visit: impl FnMut(f64, f64, f64)) {
        let mut level = 0.0;
        let mut i = 0;
        while i < self.jumps.len() {
            let t = self.jumps[i].0;
            let before = level + self.drift * t;
            while i < self.jumps.len() && self.jumps[i].0 == t {
                level += self.jumps[i].1;
                i += 1;
            }
            visit(t, before, level + self.drift * t);
        }
        let end = level + self.drift * self.window;
        visit(self.window, end, end);
    }
}

impl SamplePath for StepPath {
    fn window(&self) -> f64 {
        self.window
    }

    fn value(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.0 <= t);
        self.drift * t + self.jumps[..k].iter().map(|j| j.1).sum::<f64>()
    }

    fn queueing_map(&self, capacity: f64) -> f64 {
        // Between jumps x(t) − Ct is linear, so the supremum is at a jump time
        // (from the left or right) or at the window end.
        let mut best = 0.0f64;
        self.scan(|t, before, after| {
            best = best.max(before - capacity * t).max(after - capacity * t);
        });
        best
    }

    fn scaled_uniform_norm(&self) -> f64 {
        // x(t)/(1+t) is monotone on each linear piece.
        let mut best = 0.0f64;
        self.scan(|t, before, after| {
            best = best
                .max(before.abs() / (1.0 + t))
                .max(after.abs() / (1.0 + t));
        });
        best
    }
}

/// Continuous piecewise-linear path through (t_k, x_k), with x(0) = 0.
///
/// An optional tail slope extends the path linearly beyond the last
/// breakpoint, which lets the queueing map see the whole half-line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    values: Vec<f64>,
    tail_slope: Option<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::Usage(format!(
                "a piecewise-linear path needs at least two breakpoints with values \
                 (got {} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Usage("a path must start at (0, 0)".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::Usage(
                "breakpoint times must be finite and strictly increasing".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Usage("path values must be finite".into()));
        }
        Ok(Self {
            times,
            values,
            tail_slope: None,
        })
    }

    /// The line x(t) = slope·t on [0, window].
    pub fn straight_line(window: f64, slope: f64) -> Result<Self> {
        Self::new(vec![0.0, window], vec![0.0, slope * window])
    }

    /// Builds a path from consecutive (duration, slope) segments.
    pub fn from_segments(segments: &[(f64, f64)]) -> Result<Self> {
        let mut times = vec![0.0];
        let mut values = vec![0.0];
        for &(len, slope) in segments {
            if !(len > 0.0) {
                return Err(Error::Usage(format!(
                    "segment length must be positive, got {len}"
                )));
            }
            times.push(times.last().unwrap() + len);
            values.push(values.last().unwrap() + slope * len);
        }
        Self::new(times, values)
    }

    pub fn with_tail_slope(mut self, slope: f64) -> Self {
        self.tail_slope = Some(slope);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_slope(&self) -> Option<f64> {
        self.tail_slope
    }

    /// (length, slope) of each segment inside the window.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| {
                let len = t[1] - t[0];
                (len, (v[1] - v[0]) / len)
            })
    }

    /// Value at `t`, using the tail slope beyond the window when present
    /// and holding the last value otherwise.
    pub fn value_at(&self, t: f64) -> f64 {
        let end = *self.times.last().unwrap();
        let last = *self.values.last().unwrap();
        if t >= end {
            return last + self.tail_slope.unwrap_or(0.0) * (t - end);
        }
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.times.partition_point(|s| *s <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

impl SamplePath for PiecewiseLinearPath {
    fn window(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn value(&self, t: f64) -> f64 {
        self.value_at(t)
    }

    fn queueing_map(&self, capacity: f64) -> f64 {
        if let Some(s) = self.tail_slope {
            if s > capacity {
                return f64::INFINITY;
            }
        }
        self.times
            .iter()
            .zip(&self.values)
            .map(|(t, v)| v - capacity * t)
            .fold(0.0, f64::max)
    }

    fn scaled_uniform_norm(&self) -> f64 {
        let at_breaks = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(t, v)| v.abs() / (1.0 + t))
            .fold(0.0, f64::max);
        match self.tail_slope {
            Some(s) => at_breaks.max(s.abs()),
            None => at_breaks,
        }
    }
}

/// Polygonal interpolation of a jump path.
///
/// Each jump is accrued linearly over the interval since the previous jump
/// (or since 0), so the result agrees with the step path at every jump time
/// and stays within one jump of it everywhere. After the last jump only the
/// drift remains, up to the window end. Simultaneous jumps are accrued
/// together.
pub fn polygonal(path: &StepPath) -> PiecewiseLinearPath {
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut level = 0.0;
    let mut i = 0;
    let jumps = path.jumps();
    while i < jumps.len() {
        let t = jumps[i].0;
        while i < jumps.len() && jumps[i].0 == t {
            level += jumps[i].1;
            i += 1;
        }
        times.push(t);
        values.push(level + path.drift() * t);
    }
    let end = path.window();
    if *times.last().unwrap() < end {
        times.push(end);
        values.push(level + path.drift() * end);
    }
    PiecewiseLinearPath {
        times,
        values,
        tail_slope: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queueing_map_examples() {
        let flat = PiecewiseLinearPath::straight_line(3.0, 0.5).unwrap();
        assert_eq!(queueing_map(&flat, 1.0), 0.0);
        let steep = PiecewiseLinearPath::straight_line(1.0, 2.0).unwrap();
        assert_eq!(queueing_map(&steep, 1.0), 1.0);
        let tail = steep.clone().with_tail_slope(1.5);
        assert_eq!(queueing_map(&tail, 1.0), f64::INFINITY);
        assert_eq!(queueing_map(&steep.with_tail_slope(0.0), 1.0), 1.0);
    }

    #[test]
    fn step_path_queueing_map_uses_left_limits() {
        // Drift +1 and capacity 0.5: x(t) − 0.5t rises until the negative jump.
        let p = StepPath::new(2.0, 1.0, vec![(1.0, -3.0)]).unwrap();
        assert!((queueing_map(&p, 0.5) - 0.5).abs() < 1e-15);
        let q = StepPath::new(2.0, -1.0, vec![(1.0, 5.0)]).unwrap();
        assert!((queueing_map(&q, 1.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_norm_examples() {
        let zero = PiecewiseLinearPath::straight_line(4.0, 0.0).unwrap();
        assert_eq!(scaled_uniform_norm(&zero), 0.0);
        let id = PiecewiseLinearPath::straight_line(4.0, 1.0).unwrap();
        assert!((scaled_uniform_norm(&id) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn polygonal_of_a_single_jump() {
        let step = StepPath::new(2.0, 0.0, vec![(1.0, 1.0)]).unwrap();
        let poly = polygonal(&step);
        assert_eq!(poly.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(poly.values(), &[0.0, 1.0, 1.0]);
        assert!((poly.value_at(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn polygonal_without_jumps_is_the_drift_line() {
        let step = StepPath::new(3.0, -0.5, vec![]).unwrap();
        let poly = polygonal(&step);
        assert_eq!(poly.times(), &[0.0, 3.0]);
        assert_eq!(poly.values(), &[0.0, -1.5]);
    }

    #[test]
    fn piecewise_linear_validation() {
        assert!(PiecewiseLinearPath::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.5, 1.0], vec![0.0, 1.0]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
    }
}
