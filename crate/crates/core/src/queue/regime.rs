//! The (α, β) scaling grid.
//!
//! With N sources, the buffer is N^α B and the service rate is
//! NλE\[Y\] + N^β C. Depending on (α, β) the overflow probability decays at one of
//! five speeds; points of the plane outside the five cases are left
//! unclassified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five regimes of the (α, β) plane, plus everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeCase {
    /// α = β = 1: classical many-sources large deviations.
    OriginalLd,
    /// 0 < α < β = 1: buffer smaller than the capacity excess.
    SmallBufferLd,
    /// ½ < α = β < 1: classical moderate deviations.
    OriginalMd,
    /// α < β < 1, α + β > 1: Brownian small-buffer regime.
    SmallBufferMd,
    /// 0 < α < 1 < β: load vanishing with N.
    LightLoad,
    Unclassified,
}

impl RegimeCase {
    pub fn name(self) -> &'static str {
        match self {
            RegimeCase::OriginalLd => "original_ld",
            RegimeCase::SmallBufferLd => "small_buffer_ld",
            RegimeCase::OriginalMd => "original_md",
            RegimeCase::SmallBufferMd => "small_buffer_md",
            RegimeCase::LightLoad => "light_load",
            RegimeCase::Unclassified => "unclassified",
        }
    }

    /// Human-readable speed, e.g. `N^0.85`.
    pub fn speed_label(self, alpha: f64, beta: f64) -> String {
        // Sums of exponents pick up rounding noise (0.6 + 0.8 − 1 = 0.3999…).
        let e = |x: f64| (x * 1e9).round() / 1e9;
        let (alpha, two_alpha, sum) = (e(alpha), e(2.0 * alpha - 1.0), e(alpha + beta - 1.0));
        match self {
            RegimeCase::OriginalLd => "N".into(),
            RegimeCase::SmallBufferLd => format!("N^{alpha}"),
            RegimeCase::OriginalMd => format!("N^{two_alpha}"),
            RegimeCase::SmallBufferMd => format!("N^{sum}"),
            RegimeCase::LightLoad => format!("N^{alpha} ln N"),
            RegimeCase::Unclassified => "undefined".into(),
        }
    }
}

impl std::fmt::Display for RegimeCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponents closer than this are treated as equal when classifying.
const EXPONENT_TOL: f64 = 1e-12;

/// Assigns the regime of (α, β).
pub fn classify_case(alpha: f64, beta: f64) -> RegimeCase {
    let eq = |a: f64, b: f64| (a - b).abs() <= EXPONENT_TOL;
    let lt = |a: f64, b: f64| a < b - EXPONENT_TOL;
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return RegimeCase::Unclassified;
    }
    if eq(alpha, 1.0) && eq(beta, 1.0) {
        RegimeCase::OriginalLd
    } else if eq(beta, 1.0) && lt(alpha, 1.0) {
        RegimeCase::SmallBufferLd
    } else if eq(alpha, beta) && lt(0.5, alpha) && lt(alpha, 1.0) {
        RegimeCase::OriginalMd
    } else if lt(alpha, beta) && lt(beta, 1.0) && lt(1.0, alpha + beta) {
        RegimeCase::SmallBufferMd
    } else if lt(alpha, 1.0) && lt(1.0, beta) {
        RegimeCase::LightLoad
    } else {
        RegimeCase::Unclassified
    }
}

/// Buffer and capacity scaling of an N-source queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub alpha: f64,
    pub beta: f64,
    /// B: the buffer is N^α B work units.
    pub buffer: f64,
    /// C: the service rate exceeds the mean load by N^β C.
    pub capacity: f64,
    pub case: RegimeCase,
}

impl ScalingRegime {
    pub fn new(alpha: f64, beta: f64, buffer: f64, capacity: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("C", capacity)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(buffer.is_finite() && buffer >= 0.0) {
            return Err(Error::Config(format!(
                "B must be nonnegative, got {buffer}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            buffer,
            capacity,
            case: classify_case(alpha, beta),
        })
    }

    /// Fails with an unsupported error, listing the five regimes, when (α, β)
    /// falls outside all of them.
    pub fn require_classified(&self) -> Result<()> {
        if self.case != RegimeCase::Unclassified {
            return Ok(());
        }
        Err(Error::Unsupported(format!(
            "(α, β) = ({}, {}) matches none of the five regimes: original_ld (α = β = 1), \
             small_buffer_ld (0 < α < β = 1), original_md (½ < α = β < 1), \
             small_buffer_md (α < β < 1, α + β > 1), light_load (0 < α < 1 < β)",
            self.alpha, self.beta
        )))
    }

    /// Same exponents and capacity with a different buffer constant.
    pub fn with_buffer(&self, buffer: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, buffer, self.capacity)
    }

    /// f(N), or `None` when the regime is unclassified.
    pub fn speed(&self, n: f64) -> Option<f64> {
        let (a, b) = (self.alpha, self.beta);
        match self.case {
            RegimeCase::OriginalLd => Some(n),
            RegimeCase::SmallBufferLd => Some(n.powf(a)),
            RegimeCase::OriginalMd => Some(n.powf(2.0 * a - 1.0)),
            RegimeCase::SmallBufferMd => Some(n.powf(a + b - 1.0)),
            RegimeCase::LightLoad => Some(n.powf(a) * n.ln()),
            RegimeCase::Unclassified => None,
        }
    }

    pub fn speed_label(&self) -> String {
        self.case.speed_label(self.alpha, self.beta)
    }

    /// N^α B.
    pub fn buffer_level(&self, n: u64) -> f64 {
        (n as f64).powf(self.alpha) * self.buffer
    }

    /// N^β C.
    pub fn excess_capacity(&self, n: u64) -> f64 {
        (n as f64).powf(self.beta) * self.capacity
    }

    /// Factor N^{α−β} converting scaled time into real time.
    pub fn time_scale(&self, n: u64) -> f64 {
        (n as f64).powf(self.alpha - self.beta)
    }
}
