use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the work carried by a single arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MarkLaw {
    /// Every arrival carries one unit of work.
    Unit,
    /// Every arrival carries `value` units.
    Deterministic { value: f64 },
    /// Exponentially distributed work with the given mean.
    Exponential { mean: f64 },
    /// Finitely supported law on positive values.
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

impl MarkLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            MarkLaw::Unit => Ok(()),
            MarkLaw::Deterministic { value } => positive("deterministic mark", *value),
            MarkLaw::Exponential { mean } => positive("exponential mark mean", *mean),
            MarkLaw::Discrete {
                values,
                probabilities,
            } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err(Error::Config(
                        "discrete mark law needs equally many values and probabilities".into(),
                    ));
                }
                for &v in values {
                    positive("discrete mark value", v)?;
                }
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Config(
                        "discrete mark probabilities must be nonnegative".into(),
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "discrete mark probabilities sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, MarkLaw::Unit)
    }

    /// E\[Y\].
    pub fn mean(&self) -> f64 {
        match self {
            MarkLaw::Unit => 1.0,
            MarkLaw::Deterministic { value } => *value,
            MarkLaw::Exponential { mean } => *mean,
            MarkLaw::Discrete {
                values,
                probabilities,
            } => values.iter().zip(probabilities).map(|(v, p)| v * p).sum(),
        }
    }

    /// E\[Y²\].
    pub fn second_moment(&self) -> f64 {
        match self {
            MarkLaw::Unit => 1.0,
            MarkLaw::Deterministic { value } => value * value,
            MarkLaw::Exponential { mean } => 2.0 * mean * mean,
            MarkLaw::Discrete {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| v * v * p)
                .sum(),
        }
    }

    /// Supremum of the set where the moment generating function is finite.
    pub fn mgf_domain_sup(&self) -> f64 {
        match self {
            MarkLaw::Exponential { mean } => 1.0 / mean,
            _ => f64::INFINITY,
        }
    }

    /// M(θ) = E[exp(θY)], `+inf` outside the domain.
    pub fn mgf(&self, theta: f64) -> f64 {
        match self {
            MarkLaw::Unit => theta.exp(),
            MarkLaw::Deterministic { value } => (theta * value).exp(),
            MarkLaw::Exponential { mean } => {
                if theta * mean >= 1.0 {
                    f64::INFINITY
                } else {
                    1.0 / (1.0 - theta * mean)
                }
            }
            MarkLaw::Discrete {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * (theta * v).exp())
                .sum(),
        }
    }

    /// M'(θ).
    pub fn mgf_derivative(&self, theta: f64) -> f64 {
        match self {
            MarkLaw::Unit => theta.exp(),
            MarkLaw::Deterministic { value } => value * (theta * value).exp(),
            MarkLaw::Exponential { mean } => {
                if theta * mean >= 1.0 {
                    f64::INFINITY
                } else {
                    let d = 1.0 - theta * mean;
                    mean / (d * d)
                }
            }
            MarkLaw::Discrete {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * v * (theta * v).exp())
                .sum(),
        }
    }

    /// ln M(θ), evaluated without intermediate overflow; `+inf` outside the domain.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match self {
            MarkLaw::Unit => theta,
            MarkLaw::Deterministic { value } => theta * value,
            MarkLaw::Exponential { mean } => {
                if theta * mean >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-theta * mean).ln_1p()
                }
            }
            MarkLaw::Discrete {
                values,
                probabilities,
            } => {
                let top = values
                    .iter()
                    .zip(probabilities)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, _)| theta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = values
                    .iter()
                    .zip(probabilities)
                    .map(|(v, p)| p * (theta * v - top).exp())
                    .sum();
                top + s.ln()
            }
        }
    }

    /// M'(θ)/M(θ), the mean of the tilted law; `+inf` outside the domain.
    pub fn tilted_mean(&self, theta: f64) -> f64 {
        match self {
            MarkLaw::Unit => 1.0,
            MarkLaw::Deterministic { value } => *value,
            MarkLaw::Exponential { mean } => {
                if theta * mean >= 1.0 {
                    f64::INFINITY
                } else {
                    mean / (1.0 - theta * mean)
                }
            }
            MarkLaw::Discrete {
                values,
                probabilities,
            } => {
                let lm = self.log_mgf(theta);
                values
                    .iter()
                    .zip(probabilities)
                    .map(|(v, p)| p * v * (theta * v - lm).exp())
                    .sum()
            }
        }
    }

    /// Inverse-CDF sampling from a uniform draw in `(0, 1)`.
    ///
    /// Sampling through a single uniform keeps nominal and tilted laws coupled
    /// when they are fed the same stream.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            MarkLaw::Unit => 1.0,
            MarkLaw::Deterministic { value } => *value,
            MarkLaw::Exponential { mean } => -mean * (-u).ln_1p(),
            MarkLaw::Discrete {
                values,
                probabilities,
            } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // Rounding in the cumulative sum can leave u just above it.
                let last = probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                values[last]
            }
        }
    }

    /// The exponentially tilted law with density proportional to `exp(θy)`.
    pub fn tilted(&self, theta: f64) -> Result<MarkLaw> {
        if theta >= self.mgf_domain_sup() {
            return Err(Error::Domain(format!(
                "tilt {theta} outside the mark MGF domain (sup {})",
                self.mgf_domain_sup()
            )));
        }
        Ok(match self {
            MarkLaw::Unit | MarkLaw::Deterministic { .. } => self.clone(),
            MarkLaw::Exponential { mean } => MarkLaw::Exponential {
                mean: mean / (1.0 - theta * mean),
            },
            MarkLaw::Discrete {
                values,
                probabilities,
            } => {
                let lm = self.log_mgf(theta);
                MarkLaw::Discrete {
                    values: values.clone(),
                    probabilities: values
                        .iter()
                        .zip(probabilities)
                        .map(|(v, p)| p * (theta * v - lm).exp())
                        .collect(),
                }
            }
        })
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mgf_at_zero_is_one() {
        let laws = [
            MarkLaw::Unit,
            MarkLaw::Deterministic { value: 2.5 },
            MarkLaw::Exponential { mean: 0.7 },
            MarkLaw::Discrete {
                values: vec![1.0, 3.0],
                probabilities: vec![0.25, 0.75],
            },
        ];
        for law in &laws {
            assert!((law.mgf(0.0) - 1.0).abs() < 1e-15, "{law:?}");
            assert!(law.second_moment() >= law.mean().powi(2) - 1e-12);
        }
    }

    #[test]
    fn exponential_mgf_closed_form_and_boundary() {
        let law = MarkLaw::Exponential { mean: 1.0 };
        assert!((law.mgf(0.5) - 2.0).abs() < 1e-15);
        assert_eq!(law.mgf(1.0), f64::INFINITY);
        assert_eq!(law.mgf(3.0), f64::INFINITY);
        assert_eq!(law.mgf_domain_sup(), 1.0);
    }

    #[test]
    fn unit_mgf_is_exponential() {
        for theta in [-2.0, 0.3, 1.0, 4.0] {
            assert_eq!(MarkLaw::Unit.mgf(theta), f64::exp(theta));
        }
    }

    #[test]
    fn discrete_probabilities_must_sum_to_one() {
        let bad = MarkLaw::Discrete {
            values: vec![1.0, 2.0],
            probabilities: vec![0.5, 0.4],
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn tilted_exponential_mean_matches_mgf_ratio() {
        let law = MarkLaw::Exponential { mean: 0.5 };
        let t = law.tilted(1.0).unwrap();
        // Tilted mean equals M'(θ)/M(θ).
        let expect = law.mgf_derivative(1.0) / law.mgf(1.0);
        assert!((t.mean() - expect).abs() < 1e-12);
    }

    #[test]
    fn tilted_discrete_reweights() {
        let law = MarkLaw::Discrete {
            values: vec![1.0, 2.0],
            probabilities: vec![0.5, 0.5],
        };
        let t = law.tilted(2.0_f64.ln()).unwrap();
        match t {
            MarkLaw::Discrete { probabilities, .. } => {
                assert!((probabilities[0] - 2.0 / 6.0).abs() < 1e-12);
                assert!((probabilities[1] - 4.0 / 6.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn log_mgf_and_tilted_mean_agree_with_direct_forms() {
        let laws = [
            MarkLaw::Unit,
            MarkLaw::Deterministic { value: 0.7 },
            MarkLaw::Exponential { mean: 2.0 },
            MarkLaw::Discrete {
                values: vec![0.5, 3.0],
                probabilities: vec![0.25, 0.75],
            },
        ];
        for law in &laws {
            for theta in [-2.0, -0.3, 0.0, 0.2, 0.45] {
                let direct = law.mgf(theta).ln();
                assert!((law.log_mgf(theta) - direct).abs() < 1e-12);
                let ratio = law.mgf_derivative(theta) / law.mgf(theta);
                assert!((law.tilted_mean(theta) - ratio).abs() < 1e-12);
            }
        }
        let big = MarkLaw::Discrete {
            values: vec![1.0, 2.0],
            probabilities: vec![0.5, 0.5],
        };
        assert!((big.log_mgf(1000.0) - (2000.0 + 0.5f64.ln())).abs() < 1e-9);
        assert!((big.tilted_mean(1000.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_sampling() {
        let law = MarkLaw::Discrete {
            values: vec![1.0, 5.0],
            probabilities: vec![0.2, 0.8],
        };
        assert_eq!(law.sample(0.1), 1.0);
        assert_eq!(law.sample(0.5), 5.0);
        assert_eq!(law.sample(0.999_999_999), 5.0);
        let e = MarkLaw::Exponential { mean: 2.0 };
        assert!((e.sample(1.0 - (-1.0f64).exp()) - 2.0).abs() < 1e-12);
    }
}
