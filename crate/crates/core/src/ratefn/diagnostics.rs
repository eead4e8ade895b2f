//! Runtime checks that Ψ grows fast enough at large times.
//!
//! The small-buffer results need, for every x away from the mean,
//! tΨ(x,t)/ln t → ∞ (first order), and the analogous statement for
//! tΨ(λE\[Y\]+d, t)/(d² ln t) as d → 0 and t → ∞ in either order (second order).
//! Limits cannot be computed, so the checks look at a finite probe grid: a
//! ratio that stays above a threshold while tΨ keeps growing against ln t
//! passes, a ratio that decays while tΨ stalls fails, and anything else is a
//! warning.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::traffic::TrafficModel;

use super::cumulant::{AnalyticCumulant, LogMgfSource};
use super::legendre::psi_with;

/// Probe points for the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    /// Levels x, as multiples of the mean rate λE\[Y\].
    pub levels: Vec<f64>,
    /// Offsets d, as multiples of the mean rate.
    pub offsets: Vec<f64>,
    /// Times t; all must exceed 1 so that ln t > 0.
    pub times: Vec<f64>,
    /// Ratios must stay above this to pass.
    pub threshold: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            levels: vec![0.25, 0.5, 1.5, 2.0, 4.0],
            offsets: vec![-0.2, -0.1, -0.05, 0.05, 0.1, 0.2],
            times: vec![2.0, 5.0, 10.0, 30.0, 100.0, 300.0, 1000.0],
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

/// The three growth conditions on Ψ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// tΨ(x,t)/ln t for fixed x ≠ λE\[Y\], t → ∞.
    FirstOrder,
    /// tΨ(λE\[Y\]+d,t)/(d² ln t): d → 0 first, then t → ∞.
    SecondOrderDThenT,
    /// The same ratio with t → ∞ first, then d → 0.
    SecondOrderTThenD,
}

/// One evaluated probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub check: Check,
    pub x: f64,
    pub d: Option<f64>,
    pub t: f64,
    pub psi: f64,
    pub ratio: f64,
}

/// Verdict and summary statistics for one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub verdict: Verdict,
    /// Smallest ratio seen along the decisive sequence.
    pub min_ratio: f64,
    /// Slope of tΨ against ln t between the first and last probe time.
    pub growth: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub mean_rate: f64,
    pub probes: Vec<Probe>,
    pub checks: Vec<CheckResult>,
    pub verdict: Verdict,
}

/// Classifies one sequence of (ln t, tΨ) points.
fn judge(seq: &[(f64, f64)], threshold: f64, decades_ok: bool) -> (Verdict, f64, f64) {
    let ratios: Vec<f64> = seq.iter().map(|(lt, tp)| tp / lt).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let (first, last) = (seq[0], seq[seq.len() - 1]);
    let growth = if last.0 > first.0 {
        let g = (last.1 - first.1) / (last.0 - first.0);
        if g.is_nan() {
            f64::INFINITY
        } else {
            g
        }
    } else {
        0.0
    };
    let decaying = ratios[ratios.len() - 1] < ratios[0];
    let verdict = if !decades_ok {
        Verdict::Warn
    } else if min_ratio > threshold && growth > threshold {
        Verdict::Pass
    } else if growth <= threshold && decaying {
        Verdict::Fail
    } else {
        Verdict::Warn
    };
    (verdict, min_ratio, growth)
}

fn worst(results: impl Iterator<Item = (Verdict, f64, f64)>) -> (Verdict, f64, f64) {
    results.fold((Verdict::Pass, f64::INFINITY, f64::INFINITY), |acc, r| {
        (acc.0.max(r.0), acc.1.min(r.1), acc.2.min(r.2))
    })
}

/// Diagnostics for a model, with the exact Λ_t.
pub fn assumption_diagnostics(
    model: &TrafficModel,
    probe: &ProbeGrid,
) -> Result<DiagnosticsReport> {
    let mut source = AnalyticCumulant::new(model)?;
    assumption_diagnostics_with(&mut source, probe)
}

/// Diagnostics against any Λ_t source.
pub fn assumption_diagnostics_with(
    source: &mut dyn LogMgfSource,
    probe: &ProbeGrid,
) -> Result<DiagnosticsReport> {
    let mean = source.mean_rate();
    let mut times: Vec<f64> = probe.times.iter().copied().filter(|t| *t > 1.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let decades_ok = times.len() >= 2 && times[times.len() - 1] / times[0] >= 100.0;
    let mut probes = Vec::new();
    let mut checks = Vec::new();
    if times.is_empty() {
        for check in [
            Check::FirstOrder,
            Check::SecondOrderDThenT,
            Check::SecondOrderTThenD,
        ] {
            checks.push(CheckResult {
                check,
                verdict: Verdict::Warn,
                min_ratio: f64::NAN,
                growth: f64::NAN,
                detail: "no probe time exceeds 1".into(),
            });
        }
        return Ok(DiagnosticsReport {
            mean_rate: mean,
            probes,
            checks,
            verdict: Verdict::Warn,
        });
    }
    let span = format!("t from {} to {}", times[0], times[times.len() - 1]);

    // First order: one sequence in t per level.
    let levels: Vec<f64> = probe
        .levels
        .iter()
        .map(|l| l * mean)
        .filter(|x| (x - mean).abs() > 1e-12 * mean.abs().max(1.0))
        .collect();
    let mut first = Vec::new();
    for &x in &levels {
        let mut seq = Vec::new();
        for &t in &times {
            let psi = psi_with(source, x, t)?;
            let tp = t * psi;
            probes.push(Probe {
                check: Check::FirstOrder,
                x,
                d: None,
                t,
                psi,
                ratio: tp / t.ln(),
            });
            seq.push((t.ln(), tp));
        }
        first.push(judge(&seq, probe.threshold, decades_ok));
    }
    let (v, m, g) = worst(first.into_iter());
    checks.push(CheckResult {
        check: Check::FirstOrder,
        verdict: if levels.is_empty() { Verdict::Warn } else { v },
        min_ratio: m,
        growth: g,
        detail: format!("{} levels, {span}", levels.len()),
    });

    // Second order: table of tΨ(m+d,t)/d² over (d, t).
    let offsets: Vec<f64> = probe
        .offsets
        .iter()
        .map(|o| o * mean)
        .filter(|d| *d != 0.0)
        .collect();
    let mut table = vec![vec![0.0; times.len()]; offsets.len()];
    for (i, &d) in offsets.iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            let psi = psi_with(source, mean + d, t)?;
            let scaled = t * psi / (d * d);
            table[i][j] = scaled;
            probes.push(Probe {
                check: Check::SecondOrderTThenD,
                x: mean + d,
                d: Some(d),
                t,
                psi,
                ratio: scaled / t.ln(),
            });
        }
    }
    if offsets.is_empty() {
        for check in [Check::SecondOrderDThenT, Check::SecondOrderTThenD] {
            checks.push(CheckResult {
                check,
                verdict: Verdict::Warn,
                min_ratio: f64::NAN,
                growth: f64::NAN,
                detail: "no nonzero offsets".into(),
            });
        }
    } else {
        // d first: at each t take the smallest-|d| values (worst over sign).
        let smallest = offsets
            .iter()
            .map(|d| d.abs())
            .fold(f64::INFINITY, f64::min);
        let inner: Vec<usize> = (0..offsets.len())
            .filter(|&i| offsets[i].abs() <= smallest * (1.0 + 1e-12))
            .collect();
        let seq: Vec<(f64, f64)> = times
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let v = inner
                    .iter()
                    .map(|&i| table[i][j])
                    .fold(f64::INFINITY, f64::min);
                (t.ln(), v)
            })
            .collect();
        let (v, m, g) = judge(&seq, probe.threshold, decades_ok);
        checks.push(CheckResult {
            check: Check::SecondOrderDThenT,
            verdict: v,
            min_ratio: m,
            growth: g,
            detail: format!("|d| = {smallest}, {span}"),
        });
        // t first: a sequence in t for every d, worst over d.
        let (v, m, g) = worst((0..offsets.len()).map(|i| {
            let seq: Vec<(f64, f64)> = times
                .iter()
                .enumerate()
                .map(|(j, t)| (t.ln(), table[i][j]))
                .collect();
            judge(&seq, probe.threshold, decades_ok)
        }));
        checks.push(CheckResult {
            check: Check::SecondOrderTThenD,
            verdict: v,
            min_ratio: m,
            growth: g,
            detail: format!("{} offsets, {span}", offsets.len()),
        });
    }
    let verdict = checks
        .iter()
        .map(|c| c.verdict)
        .max()
        .unwrap_or(Verdict::Warn);
    Ok(DiagnosticsReport {
        mean_rate: mean,
        probes,
        checks,
        verdict,
    })
}
