//! Log moment generating functions Λ_t(θ) = ln E[exp(θ A(0,t))] of one source.
//!
//! Every supported family has an exact form. Poisson and exponential renewal
//! sources give λt(M(θ)−1); deterministic renewals have a two-point count law;
//! Erlang renewals and on/off sources are Markovian arrival processes, for which
//! E[exp(θA(0,t))] = π exp(t(D0 + M(θ)D1)) 1 with π the stationary phase law.
//! The Monte Carlo source estimates the same quantity from simulated counts.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::traffic::{EventClock, InterArrival, ProcessFamily, TrafficModel};

/// How Λ_t (and quantities derived from it) is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Analytic,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

/// A Λ_t value with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Anything that can serve Λ_t(θ) to the Legendre machinery.
///
/// Implementations must be convex in θ with Λ_t(0) = 0.
pub trait LogMgfSource {
    /// Mean work per unit time, the slope of Λ_t at θ = 0 divided by t.
    fn mean_rate(&self) -> f64;

    /// Supremum of the θ-domain on which Λ_t is finite.
    fn theta_sup(&self) -> f64;

    /// Whether A(0,t) is nonnegative, so that Ψ(x,t) = ∞ for x < 0.
    fn nonnegative(&self) -> bool {
        true
    }

    fn log_mgf(&mut self, theta: f64, t: f64) -> Result<f64>;

    fn log_mgf_derivative(&mut self, theta: f64, t: f64) -> Result<f64>;

    /// ln P(A(0,t) = 0), the limit of Λ_t(θ) as θ → −∞; may be −∞.
    fn log_prob_empty(&mut self, t: f64) -> Result<f64>;
}

/// Markovian arrival process representation (D0, D1, π).
#[derive(Debug, Clone)]
struct Map {
    d0: DMatrix<f64>,
    d1: DMatrix<f64>,
    pi: DVector<f64>,
}

impl Map {
    fn of(process: &ProcessFamily) -> Option<Map> {
        match process {
            ProcessFamily::Renewal {
                interarrival: InterArrival::Erlang { shape, mean },
            } if *shape > 1 => {
                let k = *shape as usize;
                let mu = k as f64 / mean;
                let mut d0 = DMatrix::zeros(k, k);
                let mut d1 = DMatrix::zeros(k, k);
                for i in 0..k {
                    d0[(i, i)] = -mu;
                    if i + 1 < k {
                        d0[(i, i + 1)] = mu;
                    }
                }
                d1[(k - 1, 0)] = mu;
                Some(Map {
                    d0,
                    d1,
                    pi: DVector::from_element(k, 1.0 / k as f64),
                })
            }
            ProcessFamily::OnOff {
                switch_on_rate: a,
                switch_off_rate: b,
                peak_rate: p,
            } => {
                let d0 = DMatrix::from_row_slice(2, 2, &[-a, *a, *b, -b - p]);
                let d1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, *p]);
                let pi = DVector::from_row_slice(&[b / (a + b), a / (a + b)]);
                Some(Map { d0, d1, pi })
            }
            _ => None,
        }
    }

    /// ln π exp(t(D0 + zD1)) 1 and, optionally, its derivative in z.
    fn log_transform(&self, z: f64, t: f64, with_derivative: bool) -> (f64, f64) {
        let k = self.pi.len();
        let g = &self.d0 + &self.d1 * z;
        if !with_derivative {
            let (e, log_scale) = expm_metzler(&(g * t));
            let v = (self.pi.transpose() * e * DVector::from_element(k, 1.0))[0];
            return (log_scale + v.ln(), 0.0);
        }
        // Van Loan: the upper-right block of exp(t [[G, D1], [0, G]]) is ∂/∂z exp(tG).
        let mut block = DMatrix::zeros(2 * k, 2 * k);
        block.view_mut((0, 0), (k, k)).copy_from(&g);
        block.view_mut((k, k), (k, k)).copy_from(&g);
        block.view_mut((0, k), (k, k)).copy_from(&self.d1);
        let (e, log_scale) = expm_metzler(&(block * t));
        let ones = DVector::from_element(k, 1.0);
        let value = (self.pi.transpose() * e.view((0, 0), (k, k)) * &ones)[0];
        let slope = (self.pi.transpose() * e.view((0, k), (k, k)) * &ones)[0];
        (log_scale + value.ln(), slope / value)
    }
}

/// exp(A) for a Metzler matrix A (nonnegative off-diagonal), returned as
/// (E, s) with exp(A) = e^s E.
///
/// Shifting by the largest diagonal magnitude makes every Taylor term
/// nonnegative, so there is no cancellation; repeated squaring is renormalized
/// after each step so neither overflow nor underflow can occur.
fn expm_metzler(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = a.nrows();
    let shift = (0..n).map(|i| -a[(i, i)]).fold(0.0, f64::max);
    let b = a + DMatrix::identity(n, n) * shift;
    let norm = (0..n)
        .map(|i| b.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = b / 2f64.powi(squarings as i32);
    let mut e = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..40 {
        term = &term * &b / j as f64;
        e += &term;
        if term.amax() <= 1e-18 * e.amax() {
            break;
        }
    }
    let mut log_scale = 0.0;
    for _ in 0..squarings {
        let m = e.amax();
        e /= m;
        log_scale = 2.0 * (log_scale + m.ln());
        e = &e * &e;
    }
    (e, log_scale - shift)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Exact Λ_t for the supported families.
#[derive(Debug, Clone)]
pub struct AnalyticCumulant {
    model: TrafficModel,
    map: Option<Map>,
}

impl AnalyticCumulant {
    pub fn new(model: &TrafficModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model: model.clone(),
            map: Map::of(&model.process),
        })
    }

    pub fn model(&self) -> &TrafficModel {
        &self.model
    }

    /// Λ_t(θ) and dΛ_t/dθ; the derivative is only computed when asked.
    fn evaluate(&self, theta: f64, t: f64, with_derivative: bool) -> Result<(f64, f64)> {
        check_args(theta, t, self.theta_sup())?;
        let marks = &self.model.marks;
        let lm = marks.log_mgf(theta);
        let tm = marks.tilted_mean(theta);
        if let Some(rate) = self.model.poisson_rate() {
            let m = lm.exp();
            return Ok((rate * t * lm.exp_m1(), rate * t * m * tm));
        }
        if let ProcessFamily::Renewal {
            interarrival: InterArrival::Deterministic { period },
        } = &self.model.process
        {
            // Count is n+1 with probability q and n otherwise, t = (n + q) d.
            let ratio = t / period;
            let n = ratio.floor();
            let q = ratio - n;
            let tail = if q > 0.0 {
                log_add_exp((1.0 - q).ln(), q.ln() + lm)
            } else {
                0.0
            };
            let value = n * lm + tail;
            let extra = if q > 0.0 {
                (q.ln() + lm - tail).exp()
            } else {
                0.0
            };
            return Ok((value, tm * (n + extra)));
        }
        if let ProcessFamily::Renewal {
            interarrival: InterArrival::Erlang { shape: 1, mean },
        } = &self.model.process
        {
            let rate = 1.0 / mean;
            return Ok((rate * t * lm.exp_m1(), rate * t * lm.exp() * tm));
        }
        let map = self
            .map
            .as_ref()
            .expect("every non-Poisson family has a MAP form");
        if !lm.is_finite() {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        let m = lm.exp();
        let (value, dz) = map.log_transform(m, t, with_derivative);
        Ok((value, dz * m * tm))
    }
}

fn check_args(theta: f64, t: f64, sup: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Usage(format!("time must be positive, got {t}")));
    }
    if theta.is_nan() || theta >= sup {
        return Err(Error::Domain(format!(
            "θ = {theta} is outside the MGF domain (sup {sup})"
        )));
    }
    Ok(())
}

impl LogMgfSource for AnalyticCumulant {
    fn mean_rate(&self) -> f64 {
        self.model.mean_work_rate()
    }

    fn theta_sup(&self) -> f64 {
        self.model.mgf_domain_sup()
    }

    fn log_mgf(&mut self, theta: f64, t: f64) -> Result<f64> {
        Ok(self.evaluate(theta, t, false)?.0)
    }

    fn log_mgf_derivative(&mut self, theta: f64, t: f64) -> Result<f64> {
        Ok(self.evaluate(theta, t, true)?.1)
    }

    fn log_prob_empty(&mut self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Usage(format!("time must be positive, got {t}")));
        }
        if let Some(rate) = self.model.poisson_rate() {
            return Ok(-rate * t);
        }
        match (&self.model.process, &self.map) {
            (
                ProcessFamily::Renewal {
                    interarrival: InterArrival::Deterministic { period },
                },
                _,
            ) => Ok(if t >= *period {
                f64::NEG_INFINITY
            } else {
                (-t / period).ln_1p()
            }),
            (
                ProcessFamily::Renewal {
                    interarrival: InterArrival::Erlang { mean, .. },
                },
                None,
            ) => Ok(-t / mean),
            (_, Some(map)) => Ok(map.log_transform(0.0, t, false).0),
            _ => unreachable!("all families are covered"),
        }
    }
}

/// Monte Carlo Λ_t from simulated stationary sources.
///
/// Marks are integrated out exactly given the point count, so the estimate is
/// ln mean(M(θ)^{X_i}) over sampled counts X_i: a log-sum-exp of affine
/// functions of ln M(θ), hence convex in θ for any sample. Counts are cached per
/// t, and sample i is always the same stationary path, so estimates at
/// different (θ, t) share random numbers.
#[derive(Debug, Clone)]
pub struct MonteCarloCumulant {
    model: TrafficModel,
    samples: usize,
    seed: u64,
    histograms: HashMap<u64, Vec<u64>>,
}

/// Below this effective sample size the estimate is dominated by a few samples.
const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

impl MonteCarloCumulant {
    pub fn new(model: &TrafficModel, samples: usize, seed: u64) -> Result<Self> {
        model.validate()?;
        if samples < 2 {
            return Err(Error::Config(format!(
                "Monte Carlo needs at least 2 samples, got {samples}"
            )));
        }
        Ok(Self {
            model: model.clone(),
            samples,
            seed,
            histograms: HashMap::new(),
        })
    }

    /// Histogram of point counts on (0, t]; entry k counts samples with X = k.
    fn histogram(&mut self, t: f64) -> &[u64] {
        let model = &self.model;
        let seed = self.seed;
        let samples = self.samples;
        self.histograms.entry(t.to_bits()).or_insert_with(|| {
            let counts: Vec<usize> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(derive_seed(seed, i, 0));
                    let mut clock = EventClock::new(&model.process, &mut rng);
                    let mut count = 0;
                    while clock.next_time(&mut rng) <= t {
                        count += 1;
                    }
                    count
                })
                .collect();
            let max = counts.iter().copied().max().unwrap_or(0);
            let mut hist = vec![0u64; max + 1];
            for c in counts {
                hist[c] += 1;
            }
            hist
        })
    }

    /// Λ_t(θ) with its delta-method standard error and effective sample size.
    pub fn estimate(&mut self, theta: f64, t: f64) -> Result<(CumulantEstimate, f64)> {
        check_args(theta, t, self.theta_sup())?;
        let lm = self.model.marks.log_mgf(theta);
        let n = self.samples as f64;
        let hist = self.histogram(t);
        let top = hist
            .iter()
            .enumerate()
            .filter(|(_, h)| **h > 0)
            .map(|(k, _)| k as f64 * lm)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (0.0, 0.0);
        for (k, &h) in hist.iter().enumerate() {
            if h > 0 {
                let w = (k as f64 * lm - top).exp();
                s1 += h as f64 * w;
                s2 += h as f64 * w * w;
            }
        }
        let ess = s1 * s1 / s2;
        if ess < MIN_EFFECTIVE_SAMPLES {
            return Err(Error::Instability(format!(
                "Monte Carlo Λ_t(θ) at θ = {theta}, t = {t} rests on {ess:.1} effective samples; \
                 use a smaller θ or more samples"
            )));
        }
        let mean = s1 / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let value = top + mean.ln();
        let std_error = (var / n).sqrt() / mean;
        Ok((CumulantEstimate { value, std_error }, ess))
    }
}

impl LogMgfSource for MonteCarloCumulant {
    fn mean_rate(&self) -> f64 {
        self.model.mean_work_rate()
    }

    fn theta_sup(&self) -> f64 {
        self.model.mgf_domain_sup()
    }

    fn log_mgf(&mut self, theta: f64, t: f64) -> Result<f64> {
        Ok(self.estimate(theta, t)?.0.value)
    }

    fn log_mgf_derivative(&mut self, theta: f64, t: f64) -> Result<f64> {
        check_args(theta, t, self.theta_sup())?;
        let lm = self.model.marks.log_mgf(theta);
        let tm = self.model.marks.tilted_mean(theta);
        let hist = self.histogram(t);
        let top = hist
            .iter()
            .enumerate()
            .filter(|(_, h)| **h > 0)
            .map(|(k, _)| k as f64 * lm)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (k, &h) in hist.iter().enumerate() {
            if h > 0 {
                let w = h as f64 * (k as f64 * lm - top).exp();
                s0 += w;
                s1 += w * k as f64;
            }
        }
        Ok(tm * s1 / s0)
    }

    fn log_prob_empty(&mut self, t: f64) -> Result<f64> {
        let n = self.samples as f64;
        let zeros = self.histogram(t)[0] as f64;
        Ok((zeros / n).ln())
    }
}

/// Builds the Λ_t source for an evaluation mode.
pub fn cumulant_source(model: &TrafficModel, mode: EvalMode) -> Result<Box<dyn LogMgfSource>> {
    Ok(match mode {
        EvalMode::Analytic => Box::new(AnalyticCumulant::new(model)?),
        EvalMode::MonteCarlo { samples, seed } => {
            Box::new(MonteCarloCumulant::new(model, samples, seed)?)
        }
    })
}

/// Λ_t(θ) = ln E[exp(θ A(0,t))] for one source.
pub fn log_mgf_arrivals(
    model: &TrafficModel,
    theta: f64,
    t: f64,
    mode: EvalMode,
) -> Result<CumulantEstimate> {
    match mode {
        EvalMode::Analytic => {
            let value = AnalyticCumulant::new(model)?.log_mgf(theta, t)?;
            Ok(CumulantEstimate {
                value,
                std_error: 0.0,
            })
        }
        EvalMode::MonteCarlo { samples, seed } => {
            Ok(MonteCarloCumulant::new(model, samples, seed)?
                .estimate(theta, t)?
                .0)
        }
    }
}
