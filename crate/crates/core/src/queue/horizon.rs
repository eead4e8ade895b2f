//! How long a window must be simulated so that truncating the Loynes
//! supremum costs at most a given probability.
//!
//! Scaled time is cut into cells of length s. Overflow inside cell m forces the
//! aggregate to exceed a level on the real-time interval [0, u_{m+1}], with
//! u_k = N^{α−β} s k, and a Chernoff bound prices that event at
//! exp(−N u Ψ(x, u)). The horizon is the first cell boundary beyond which the
//! summed cell bounds fit in the budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratefn::{psi_with, AnalyticCumulant};
use crate::traffic::TrafficModel;

use super::regime::ScalingRegime;

/// A certified simulation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    /// Window in real time, N^{α−β} times the scaled window.
    pub window: f64,
    /// Window in the regime's scaled time.
    pub scaled_window: f64,
    /// Cell length s in scaled time.
    pub lattice: f64,
    /// Number of cells L; the scaled window is sL.
    pub cells: u64,
    /// The summed Chernoff bounds beyond the window (≤ the budget).
    pub tail_bound: f64,
}

/// Default fraction δ/B of the buffer used to size lattice cells.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.5;

/// Give up when the cell bounds have not become summable by this many cells.
const MAX_CELLS: u64 = 2_000_000;

/// Shortest lattice window whose truncation error is at most `tail_budget`.
pub fn horizon_bound(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    tail_budget: f64,
) -> Result<Horizon> {
    horizon_bound_with(model, n, regime, tail_budget, DEFAULT_DELTA_FRACTION)
}

/// [`horizon_bound`] with an explicit cell-size fraction δ/B in (0, 1).
pub fn horizon_bound_with(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    tail_budget: f64,
    delta_fraction: f64,
) -> Result<Horizon> {
    let plan = Lattice::new(model, n, regime, tail_budget, delta_fraction)?;
    if model.poisson_rate().is_some() && regime.buffer > 0.0 {
        return Ok(plan.poisson_closed_form(model));
    }
    plan.iterate(model)
}

/// The generic cell-by-cell summation, also for Poisson traffic.
pub fn horizon_bound_iterative(
    model: &TrafficModel,
    n: u64,
    regime: &ScalingRegime,
    tail_budget: f64,
    delta_fraction: f64,
) -> Result<Horizon> {
    Lattice::new(model, n, regime, tail_budget, delta_fraction)?.iterate(model)
}

struct Lattice {
    n: f64,
    budget: f64,
    /// Cell length s (scaled time).
    s: f64,
    /// N^{α−β}.
    time_scale: f64,
    /// N^{β−1}.
    level_scale: f64,
    buffer: f64,
    /// C + N^{1−β} λE\[Y\].
    slope: f64,
}

impl Lattice {
    fn new(
        model: &TrafficModel,
        n: u64,
        regime: &ScalingRegime,
        tail_budget: f64,
        delta_fraction: f64,
    ) -> Result<Self> {
        model.validate()?;
        if n == 0 {
            return Err(Error::Usage("number of sources must be positive".into()));
        }
        if !(tail_budget > 0.0) {
            return Err(Error::Usage(format!(
                "tail budget must be positive, got {tail_budget}"
            )));
        }
        if !(delta_fraction > 0.0 && delta_fraction < 1.0) {
            return Err(Error::Config(format!(
                "cell fraction δ/B must lie in (0, 1), got {delta_fraction}"
            )));
        }
        let nf = n as f64;
        let drift = nf.powf(1.0 - regime.beta) * model.mean_work_rate();
        let slope = regime.capacity + drift;
        // With a positive buffer, cells of length δ/slope let a single level
        // bound every cell; without one, cells have unit scaled cost instead.
        let s = if regime.buffer > 0.0 {
            delta_fraction * regime.buffer / slope
        } else {
            1.0 / slope
        };
        Ok(Self {
            n: nf,
            budget: tail_budget,
            s,
            time_scale: regime.time_scale(n),
            level_scale: nf.powf(regime.beta - 1.0),
            buffer: regime.buffer,
            slope,
        })
    }

    /// Per-source rate the aggregate must sustain on [0, u_{m+1}] for overflow in cell m.
    fn level(&self, m: u64) -> f64 {
        if self.buffer > 0.0 {
            // B ≥ slope·s, so (B + slope·s·m)/(s(m+1)) ≥ slope.
            self.level_scale * self.slope
        } else {
            self.level_scale * self.slope * m as f64 / (m + 1) as f64
        }
    }

    fn finish(&self, cells: u64, tail_bound: f64) -> Horizon {
        let scaled_window = self.s * cells as f64;
        Horizon {
            window: self.time_scale * scaled_window,
            scaled_window,
            lattice: self.s,
            cells,
            tail_bound,
        }
    }

    /// Poisson Ψ does not depend on t, so the cell bounds form the geometric
    /// sequence r^{m+1} and the smallest L has a closed form.
    fn poisson_closed_form(&self, model: &TrafficModel) -> Horizon {
        let exponent =
            self.n * self.time_scale * self.s * crate::ratefn::omega_star(model, self.level(0));
        let ln_r = -exponent;
        let r = ln_r.exp();
        if self.budget >= 1.0 || r == 0.0 {
            return self.finish(1, r * r / (1.0 - r));
        }
        let ln_budget = self.budget.ln() + (-r).ln_1p();
        let cells = ((ln_budget / ln_r - 1.0).ceil()).max(1.0) as u64;
        let tail = ((cells + 1) as f64 * ln_r).exp() / (1.0 - r);
        self.finish(cells, tail)
    }

    fn iterate(&self, model: &TrafficModel) -> Result<Horizon> {
        if self.budget >= 1.0 {
            let mut src = AnalyticCumulant::new(model)?;
            let t = self.cell_bound(&mut src, 1)?;
            return Ok(self.finish(1, t));
        }
        let mut source = AnalyticCumulant::new(model)?;
        let mean = model.mean_work_rate();
        // bounds[m] bounds overflow within cell m.
        let mut bounds: Vec<f64> = Vec::new();
        let mut ratio = 1.0;
        let mut settled = 0;
        for m in 0..MAX_CELLS {
            let b = self.cell_bound(&mut source, m)?;
            if m > 0 && self.level(m) > mean && b >= 1.0 && self.buffer > 0.0 {
                return Err(Error::Diagnostics(format!(
                    "Ψ({}, {}) is not positive; probe larger times before trusting the horizon",
                    self.level(m),
                    self.time_scale * self.s * (m + 1) as f64
                )));
            }
            if let Some(&prev) = bounds.last() {
                if prev > 0.0 {
                    ratio = b / prev;
                }
            }
            bounds.push(b);
            if b == 0.0 {
                break;
            }
            if b < self.budget * 1e-6 && ratio < 1.0 {
                settled += 1;
                if settled >= 3 {
                    break;
                }
            } else {
                settled = 0;
            }
        }
        let last = *bounds.last().unwrap();
        if last > 0.0 && !(ratio < 1.0 && last < self.budget * 1e-6) {
            return Err(Error::Diagnostics(format!(
                "Chernoff cell bounds are not summable within {MAX_CELLS} cells; \
                 the traffic may violate the decay assumption"
            )));
        }
        // Geometric estimate of everything after the last computed cell.
        let mut tail = if last > 0.0 {
            last * ratio / (1.0 - ratio)
        } else {
            0.0
        };
        let mut cells = bounds.len() as u64;
        for (m, &b) in bounds.iter().enumerate().rev() {
            if m == 0 || tail + b > self.budget {
                break;
            }
            tail += b;
            cells = m as u64;
        }
        Ok(self.finish(cells.max(1), tail))
    }

    fn cell_bound(&self, source: &mut AnalyticCumulant, m: u64) -> Result<f64> {
        let u = self.time_scale * self.s * (m + 1) as f64;
        let psi = psi_with(source, self.level(m), u)?;
        Ok((-self.n * u * psi).exp())
    }
}
