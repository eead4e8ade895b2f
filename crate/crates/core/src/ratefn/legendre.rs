//! Legendre–Fenchel transforms of convex cumulant functions.
//!
//! The maximizer of θy − φ(θ) solves φ'(θ) = y. Since φ' is nondecreasing the
//! root is bracketed by doubling outward from zero (or by creeping toward a
//! finite domain boundary) and then located by bisection on the derivative.
//! At the root the objective is flat, so the transform value inherits twice the
//! digits of the root.

use crate::error::{Error, Result};
use crate::traffic::TrafficModel;

use super::cumulant::{AnalyticCumulant, LogMgfSource};

/// A convex function φ with φ(0) = 0, as seen by the transform.
pub(crate) trait Convex {
    fn value(&mut self, theta: f64) -> Result<f64>;
    fn slope(&mut self, theta: f64) -> Result<f64>;
    /// lim φ(θ) as θ → −∞ (meaningful for nonnegative variables only).
    fn value_at_neg_inf(&mut self) -> Result<f64>;
    /// φ'(0).
    fn mean(&self) -> f64;
    fn theta_sup(&self) -> f64;
    fn nonnegative(&self) -> bool;
}

/// Result of a transform: the value and the maximizing θ (infinite when the
/// supremum is only approached).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Transform {
    pub value: f64,
    pub theta: f64,
}

const DOUBLINGS: usize = 1000;
const BISECTIONS: usize = 200;

/// sup_θ [θy − φ(θ)].
pub(crate) fn legendre(phi: &mut dyn Convex, y: f64) -> Result<Transform> {
    if y.is_nan() {
        return Err(Error::Usage("transform argument is NaN".into()));
    }
    let mean = phi.mean();
    if (y - mean).abs() <= 1e-15 * mean.abs().max(1.0) {
        return Ok(Transform {
            value: 0.0,
            theta: 0.0,
        });
    }
    if phi.nonnegative() {
        if y < 0.0 {
            return Ok(Transform {
                value: f64::INFINITY,
                theta: f64::NEG_INFINITY,
            });
        }
        if y == 0.0 {
            return Ok(Transform {
                value: -phi.value_at_neg_inf()?,
                theta: f64::NEG_INFINITY,
            });
        }
    }
    // g(θ) = y − φ'(θ) is nonincreasing; find lo < hi with g(lo) ≥ 0 > g(hi).
    let excess = |phi: &mut dyn Convex, th: f64| -> Result<f64> {
        let s = phi.slope(th)?;
        Ok(if s.is_nan() { f64::NEG_INFINITY } else { y - s })
    };
    let (mut lo, mut hi);
    if y > mean {
        lo = 0.0;
        let sup = phi.theta_sup();
        let mut step = 1.0;
        let mut k = 0;
        loop {
            let cand = if sup.is_finite() {
                (sup * (1.0 - 0.5f64.powi(k as i32 + 1))).min(step)
            } else {
                step
            };
            if excess(phi, cand)? < 0.0 {
                hi = cand;
                break;
            }
            lo = cand;
            k += 1;
            if k > DOUBLINGS || (sup.is_finite() && cand >= sup) {
                // φ' stays below y on the whole domain: the supremum is approached
                // at the boundary.
                let value = lo * y - phi.value(lo)?;
                return Ok(Transform {
                    value: if sup.is_finite() {
                        value
                    } else {
                        f64::INFINITY
                    },
                    theta: sup,
                });
            }
            if sup.is_finite() && step >= sup {
                step = sup;
            } else {
                step *= 2.0;
            }
        }
    } else {
        hi = 0.0;
        let mut step = -1.0;
        let mut k = 0;
        loop {
            if excess(phi, step)? >= 0.0 {
                lo = step;
                break;
            }
            hi = step;
            step *= 2.0;
            k += 1;
            if k > DOUBLINGS || !step.is_finite() {
                return Ok(Transform {
                    value: f64::INFINITY,
                    theta: f64::NEG_INFINITY,
                });
            }
        }
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * mid.abs().max(1e-300) {
            break;
        }
        if excess(phi, mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let value = theta * y - phi.value(theta)?;
    Ok(Transform {
        value: value.max(0.0),
        theta,
    })
}

/// φ(θ) = Λ_t(θ)/t for a fixed t.
struct TimeAveraged<'a> {
    source: &'a mut dyn LogMgfSource,
    t: f64,
}

impl Convex for TimeAveraged<'_> {
    fn value(&mut self, theta: f64) -> Result<f64> {
        Ok(self.source.log_mgf(theta, self.t)? / self.t)
    }
    fn slope(&mut self, theta: f64) -> Result<f64> {
        Ok(self.source.log_mgf_derivative(theta, self.t)? / self.t)
    }
    fn value_at_neg_inf(&mut self) -> Result<f64> {
        Ok(self.source.log_prob_empty(self.t)? / self.t)
    }
    fn mean(&self) -> f64 {
        self.source.mean_rate()
    }
    fn theta_sup(&self) -> f64 {
        self.source.theta_sup()
    }
    fn nonnegative(&self) -> bool {
        self.source.nonnegative()
    }
}

/// φ(θ) = λ(M(θ) − 1), the short-time limit of Λ_t(θ)/t.
struct ShortTime<'a> {
    model: &'a TrafficModel,
}

impl Convex for ShortTime<'_> {
    fn value(&mut self, theta: f64) -> Result<f64> {
        Ok(self.model.lambda() * self.model.marks.log_mgf(theta).exp_m1())
    }
    fn slope(&mut self, theta: f64) -> Result<f64> {
        let m = &self.model.marks;
        Ok(self.model.lambda() * m.log_mgf(theta).exp() * m.tilted_mean(theta))
    }
    fn value_at_neg_inf(&mut self) -> Result<f64> {
        Ok(-self.model.lambda())
    }
    fn mean(&self) -> f64 {
        self.model.mean_work_rate()
    }
    fn theta_sup(&self) -> f64 {
        self.model.mgf_domain_sup()
    }
    fn nonnegative(&self) -> bool {
        true
    }
}

/// Ψ(x,t) = sup_θ [θx − Λ_t(θ)/t] with the exact Λ_t of the model.
pub fn psi(model: &TrafficModel, x: f64, t: f64) -> Result<f64> {
    let mut source = AnalyticCumulant::new(model)?;
    psi_with(&mut source, x, t)
}

/// Ψ(x,t) for an arbitrary Λ_t source (analytic, Monte Carlo or synthetic).
pub fn psi_with(source: &mut dyn LogMgfSource, x: f64, t: f64) -> Result<f64> {
    Ok(psi_maximizer(source, x, t)?.0)
}

/// Ψ(x,t) and the maximizing θ.
pub fn psi_maximizer(source: &mut dyn LogMgfSource, x: f64, t: f64) -> Result<(f64, f64)> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Usage(format!("time must be positive, got {t}")));
    }
    let r = legendre(&mut TimeAveraged { source, t }, x)?;
    Ok((r.value, r.theta))
}

/// Ω*(y) = sup_θ [θy − λ(M(θ) − 1)].
///
/// Unit marks use the closed form y ln(y/λ) − y + λ; other laws go through
/// [`omega_star_numeric`].
pub fn omega_star(model: &TrafficModel, y: f64) -> f64 {
    if model.marks.is_unit() {
        let lambda = model.lambda();
        return if y < 0.0 {
            f64::INFINITY
        } else if y == 0.0 {
            lambda
        } else {
            y * (y / lambda).ln() - y + lambda
        };
    }
    omega_star_numeric(model, y)
}

/// Ω*(y) by numerical maximization, whatever the mark law.
pub fn omega_star_numeric(model: &TrafficModel, y: f64) -> f64 {
    legendre(&mut ShortTime { model }, y)
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
}

/// The θ attaining Ω*(y): the solution of λM'(θ) = y.
pub fn omega_star_maximizer(model: &TrafficModel, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!(
            "target rate must be positive, got {y}"
        )));
    }
    let r = legendre(&mut ShortTime { model }, y)?;
    if !r.theta.is_finite() || r.theta >= model.mgf_domain_sup() {
        return Err(Error::Domain(format!(
            "target rate {y} is not reached inside the MGF domain"
        )));
    }
    Ok(r.theta)
}
