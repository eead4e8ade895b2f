//! Gaussian rate functions on finite time grids.
//!
//! For a centered process with stationary increments and variance function
//! v(t), the covariance is Γ(s,t) = (v(s) + v(t) − v(|t−s|))/2. Restricted to a
//! grid, the Gaussian rate of a path with values z is ½ zᵀΓ⁻¹z.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::traffic::{open_unit, EventClock, TrafficModel};

use super::cumulant::{AnalyticCumulant, EvalMode, LogMgfSource};

/// Covariance matrix of the centered arrival process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    times: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl CovarianceGrid {
    /// Builds Γ from a variance function through polarization.
    pub fn from_variance(times: &[f64], v: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(times)?;
        let n = times.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            let (s, t) = (times[i], times[j]);
            if i == j {
                v(s)
            } else {
                0.5 * (v(s) + v(t) - v((t - s).abs()))
            }
        });
        Ok(Self {
            times: times.to_vec(),
            matrix,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Row-major copy of Γ.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }

    /// Replaces Γ by its nearest positive semidefinite matrix when needed.
    fn project_psd(&mut self) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
            return;
        }
        warn!("estimated covariance is not positive semidefinite; projecting");
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let q = &eig.eigenvectors;
        let mut m = q * DMatrix::from_diagonal(&clipped) * q.transpose();
        m = (&m + m.transpose()) * 0.5;
        self.matrix = m;
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Usage("the time grid is empty".into()));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage(
            "grid times must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Covariance of A(0,·) − λE\[Y\]· on a grid.
///
/// Poisson traffic uses v(t) = λE\[Y²\]t. Other families take v from the
/// curvature of the exact Λ_t at θ = 0 in analytic mode, or from sample
/// variances of simulated increments in Monte Carlo mode (all lags from the
/// same sample paths, then projected onto the PSD cone if noise broke it).
pub fn covariance_grid(
    model: &TrafficModel,
    times: &[f64],
    mode: EvalMode,
) -> Result<CovarianceGrid> {
    model.validate()?;
    check_grid(times)?;
    match mode {
        EvalMode::Analytic => {
            if let Some(rate) = model.poisson_rate() {
                let s2 = rate * model.mark_second_moment();
                return CovarianceGrid::from_variance(times, |t| s2 * t);
            }
            let mut src = AnalyticCumulant::new(model)?;
            let mut lags: Vec<f64> = lag_set(times);
            lags.retain(|l| *l > 0.0);
            let mut table = Vec::with_capacity(lags.len());
            for &l in &lags {
                let h = 1e-4;
                let up = src.log_mgf_derivative(h, l)?;
                let down = src.log_mgf_derivative(-h, l)?;
                table.push((l, (up - down) / (2.0 * h)));
            }
            CovarianceGrid::from_variance(times, |t| lookup(&table, t))
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::Config("Monte Carlo needs at least 2 samples".into()));
            }
            let lags: Vec<f64> = lag_set(times).into_iter().filter(|l| *l > 0.0).collect();
            let longest = *lags.last().unwrap();
            // One stationary path per sample on [0, longest]; v(l) from A(0, l).
            let sums: Vec<Vec<f64>> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(derive_seed(seed, i, 1));
                    let mut clock = EventClock::new(&model.process, &mut rng);
                    let mut out = vec![0.0; lags.len()];
                    let mut acc = 0.0;
                    let mut k = 0;
                    loop {
                        let t = clock.next_time(&mut rng);
                        while k < lags.len() && lags[k] < t {
                            out[k] = acc;
                            k += 1;
                        }
                        if t > longest {
                            break;
                        }
                        acc += model.marks.sample(open_unit(&mut rng));
                    }
                    out
                })
                .collect();
            let n = samples as f64;
            let table: Vec<(f64, f64)> = lags
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let mean = sums.iter().map(|s| s[k]).sum::<f64>() / n;
                    let var = sums.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    (l, var)
                })
                .collect();
            let mut grid = CovarianceGrid::from_variance(times, |t| lookup(&table, t))?;
            grid.project_psd();
            Ok(grid)
        }
    }
}

/// Every t_k and |t_k − t_l|, sorted and deduplicated.
fn lag_set(times: &[f64]) -> Vec<f64> {
    let mut lags: Vec<f64> = times.to_vec();
    for (i, s) in times.iter().enumerate() {
        for t in &times[i + 1..] {
            lags.push(t - s);
        }
    }
    lags.sort_by(f64::total_cmp);
    lags.dedup();
    lags
}

fn lookup(table: &[(f64, f64)], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let k = table.partition_point(|e| e.0 < t);
    table[k].1
}

/// ½ zᵀΓ⁻¹z, with a pseudo-inverse when Γ is singular.
pub fn rate_rkhs(values: &[f64], cov: &CovarianceGrid) -> Result<f64> {
    if values.len() != cov.len() {
        return Err(Error::Usage(format!(
            "{} path values for a {}-point covariance grid",
            values.len(),
            cov.len()
        )));
    }
    let z = DVector::from_column_slice(values);
    if let Some(chol) = cov.matrix.clone().cholesky() {
        let y = chol.solve(&z);
        return Ok((0.5 * z.dot(&y)).max(0.0));
    }
    warn!("covariance grid is singular; using the pseudo-inverse");
    let eig = SymmetricEigen::new(cov.matrix.clone());
    let top = eig.eigenvalues.amax();
    let tol = top * 1e-12 * cov.len() as f64;
    let proj = eig.eigenvectors.transpose() * &z;
    let mut q = 0.0;
    for (l, p) in eig.eigenvalues.iter().zip(proj.iter()) {
        if *l > tol {
            q += p * p / l;
        } else if p.abs() > 1e-9 * z.norm().max(1.0) {
            // Outside the range of Γ the Gaussian measure puts no mass.
            return Ok(f64::INFINITY);
        }
    }
    Ok(0.5 * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{InterArrival, MarkLaw, ProcessFamily};

    #[test]
    fn poisson_covariance_is_min_kernel() {
        let model = TrafficModel::poisson(1.0, MarkLaw::Unit).unwrap();
        let g = covariance_grid(&model, &[1.0, 2.0], EvalMode::Analytic).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.get(1, 1), 2.0);
        assert_eq!(g.get(0, 0), 1.0);
    }

    #[test]
    fn brownian_one_point_and_linear_path() {
        let g = CovarianceGrid::from_variance(&[1.0], |t| t).unwrap();
        assert!((rate_rkhs(&[3.0], &g).unwrap() - 4.5).abs() < 1e-14);
        assert_eq!(rate_rkhs(&[0.0], &g).unwrap(), 0.0);
        let (c, sigma2, horizon) = (1.7, 2.5, 3.0);
        for k in [1, 3, 10, 40] {
            let times: Vec<f64> = (1..=k).map(|i| horizon * i as f64 / k as f64).collect();
            let g = CovarianceGrid::from_variance(&times, |t| sigma2 * t).unwrap();
            let z: Vec<f64> = times.iter().map(|t| c * t).collect();
            let v = rate_rkhs(&z, &g).unwrap();
            assert!(
                (v - c * c * horizon / (2.0 * sigma2)).abs() < 1e-10,
                "k={k}: {v}"
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_a_usage_error() {
        let g = CovarianceGrid::from_variance(&[1.0, 2.0], |t| t).unwrap();
        assert!(matches!(rate_rkhs(&[1.0], &g), Err(Error::Usage(_))));
    }

    #[test]
    fn singular_grid_uses_the_pseudo_inverse() {
        // v ≡ t² is a random-slope line: rank one.
        let g = CovarianceGrid::from_variance(&[1.0, 2.0], |t| t * t).unwrap();
        assert!((rate_rkhs(&[1.0, 2.0], &g).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(rate_rkhs(&[1.0, 0.0], &g).unwrap(), f64::INFINITY);
    }

    #[test]
    fn monte_carlo_variance_matches_analytic() {
        let model = TrafficModel::poisson(1.0, MarkLaw::Unit).unwrap();
        let times = [0.5, 1.0, 2.0];
        let mc = covariance_grid(
            &model,
            &times,
            EvalMode::MonteCarlo {
                samples: 40_000,
                seed: 9,
            },
        )
        .unwrap();
        for (i, &t) in times.iter().enumerate() {
            let t: f64 = t;
            // Var of a sample variance of Poisson(t) ≈ (2t² + t)/n.
            let se = ((2.0 * t * t + t) / 40_000.0_f64).sqrt();
            assert!(
                (mc.get(i, i) - t).abs() < 4.0 * se,
                "t={t}: {}",
                mc.get(i, i)
            );
        }
    }

    #[test]
    fn renewal_variance_from_curvature() {
        // Stationary Erlang-2 (rate 1): Var N(t) = t/2 + (1 − e^{−4t})/8.
        let model = TrafficModel::new(
            ProcessFamily::Renewal {
                interarrival: InterArrival::Erlang {
                    shape: 2,
                    mean: 1.0,
                },
            },
            MarkLaw::Unit,
        )
        .unwrap();
        let g = covariance_grid(&model, &[0.5, 3.0], EvalMode::Analytic).unwrap();
        for (i, t) in [0.5f64, 3.0].iter().enumerate() {
            let exact = t / 2.0 + (1.0 - (-4.0 * t).exp()) / 8.0;
            assert!((g.get(i, i) - exact).abs() < 1e-6, "t={t}: {}", g.get(i, i));
        }
    }
}
