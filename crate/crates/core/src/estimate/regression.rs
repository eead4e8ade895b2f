use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::ScalingRegime;

use super::OverflowEstimate;

/// Least-squares fit of −ln P against the speed f(N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope: the empirical decay rate.
    pub fitted_decay: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// N values that entered the fit.
    pub used: Vec<u64>,
    /// N values dropped because their estimate was zero.
    pub excluded: Vec<u64>,
}

/// Regresses −ln P on f(N); at least four positive estimates are required.
pub fn decay_regression(
    estimates: &[OverflowEstimate],
    regime: &ScalingRegime,
) -> Result<DecayFit> {
    let same = |r: &ScalingRegime| {
        r.alpha == regime.alpha
            && r.beta == regime.beta
            && r.buffer == regime.buffer
            && r.capacity == regime.capacity
    };
    if let Some(e) = estimates.iter().find(|e| !same(&e.regime)) {
        return Err(Error::Usage(format!(
            "estimate at N = {} belongs to a different regime",
            e.n
        )));
    }
    let mut points = Vec::new();
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for e in estimates {
        if e.probability > 0.0 {
            let f = regime.speed(e.n as f64).ok_or_else(|| {
                Error::Unsupported(format!("the {} regime has no speed", regime.case))
            })?;
            points.push((f, -e.probability.ln()));
            used.push(e.n);
        } else {
            warn!("excluding N = {} from the regression: zero estimate", e.n);
            excluded.push(e.n);
        }
    }
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable estimates; at least 4 with positive probability are needed",
            points.len()
        )));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "all estimates share the same speed value".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(DecayFit {
        fitted_decay: slope,
        intercept,
        r_squared,
        used,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::EstimateMethod;

    fn synthetic(regime: &ScalingRegime, n: u64, p: f64) -> OverflowEstimate {
        OverflowEstimate {
            n,
            regime: *regime,
            probability: p,
            std_error: 0.0,
            ci_low: p,
            ci_high: p,
            replications: 1000,
            hits: 0,
            effective_sample_size: 0.0,
            normalized_log: None,
            method: EstimateMethod::Naive,
            horizon_used: 1.0,
            tail_budget: 1e-9,
        }
    }

    #[test]
    fn noiseless_exponential_decay() {
        let r = ScalingRegime::new(0.6, 0.8, 1.0, 1.0).unwrap();
        let est: Vec<_> = [64u64, 128, 256, 512, 1024]
            .iter()
            .map(|&n| synthetic(&r, n, (-2.0 * r.speed(n as f64).unwrap()).exp()))
            .collect();
        let fit = decay_regression(&est, &r).unwrap();
        assert!((fit.fitted_decay - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-9);
    }

    #[test]
    fn zero_estimates_are_excluded_and_can_starve_the_fit() {
        let r = ScalingRegime::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let mut est: Vec<_> = [16u64, 32, 64, 128]
            .iter()
            .map(|&n| synthetic(&r, n, (-(n as f64).sqrt()).exp()))
            .collect();
        est[3].probability = 0.0;
        assert!(matches!(
            decay_regression(&est, &r),
            Err(Error::InsufficientData(_))
        ));
        est.push(synthetic(&r, 256, (-16.0f64).exp()));
        let fit = decay_regression(&est, &r).unwrap();
        assert_eq!(fit.excluded, vec![128]);
    }

    #[test]
    fn light_load_speed_uses_natural_log() {
        let r = ScalingRegime::new(0.5, 2.0, 0.25, 0.5).unwrap();
        let est: Vec<_> = [256u64, 512, 1024, 2048]
            .iter()
            .map(|&n| {
                let f = (n as f64).sqrt() * (n as f64).ln();
                synthetic(&r, n, (-0.25 * f).exp())
            })
            .collect();
        let fit = decay_regression(&est, &r).unwrap();
        assert!((fit.fitted_decay - 0.25).abs() < 1e-12);
    }
}
