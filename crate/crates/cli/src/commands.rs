//! The five subcommands.

use std::path::Path;

use log::{info, warn};
use serde::Serialize;
use smallbuf::ratefn::{
    assumption_diagnostics_with, cumulant_source, rate_original_ld_partition, CheckResult,
    DiagnosticsReport, LightLoadReading, Partition, Probe,
};
use smallbuf::variational::decay_rate_with_reading;
use smallbuf::{
    covariance_grid, decay_regression, estimate_is, estimate_naive, rate_light_load, rate_rkhs,
    rate_small_buffer_ld, rate_small_buffer_md, DecayFit, DecayPrediction, OverflowEstimate,
    PiecewiseLinearPath, RegimeCase, ScalingRegime, TrafficModel, Verdict,
};

use crate::config::{Estimator, ExperimentConfig, Functional};
use crate::error::{CliError, CliResult, ErrorRecord};
use crate::output::{EstimateRow, OutDir, PlotRow, ESTIMATE_COLUMNS};

/// Shared state for one command run.
pub struct Context {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub regime: ScalingRegime,
    pub out: OutDir,
    /// Per-N failures that did not stop the command.
    pub errors: Vec<ErrorRecord>,
}

impl Context {
    fn record(&mut self, n: u64, err: CliError) {
        warn!("N = {n}: {err}");
        self.errors
            .push(ErrorRecord::new(self.command, Some(n), &err));
    }
}

/// Estimates over the sweep; failures at individual N are recorded and skipped.
fn run_sweep(
    ctx: &mut Context,
    prediction: Option<&DecayPrediction>,
) -> CliResult<Vec<OverflowEstimate>> {
    ctx.config.require_sweep()?;
    let c = ctx.config.clone();
    let mut estimates = Vec::new();
    for &n in &c.n_sweep {
        let result = match (c.estimator, prediction) {
            (Estimator::ImportanceSampled, Some(p)) => estimate_is(
                &c.traffic,
                n,
                &ctx.regime,
                p,
                c.replications,
                c.seed,
                c.tail_budget,
            ),
            _ => estimate_naive(
                &c.traffic,
                n,
                &ctx.regime,
                c.replications,
                c.seed,
                c.tail_budget,
            ),
        };
        match result {
            Ok(e) => {
                info!("N = {n}: p = {:e} ± {:e}", e.probability, e.std_error);
                estimates.push(e);
            }
            Err(e) => ctx.record(n, e.into()),
        }
    }
    let rows: Vec<EstimateRow> = estimates.iter().map(EstimateRow::from).collect();
    ctx.out
        .csv_with_header("estimates.csv", &ESTIMATE_COLUMNS, &rows)?;
    Ok(estimates)
}

fn predict_with(ctx: &Context) -> CliResult<DecayPrediction> {
    Ok(decay_rate_with_reading(
        &ctx.regime,
        &ctx.config.traffic,
        ctx.config.light_load_reading,
    )?)
}

/// Fails with [`CliError::Incomplete`] when some N were skipped.
fn finish(ctx: &Context) -> CliResult<()> {
    match ctx.errors.iter().map(|e| e.exit_code).max() {
        None => Ok(()),
        Some(code) => Err(CliError::Incomplete {
            failed: ctx.errors.len(),
            exit_code: code,
        }),
    }
}

pub fn simulate(ctx: &mut Context) -> CliResult<()> {
    let prediction = match ctx.config.estimator {
        Estimator::ImportanceSampled => Some(predict_with(ctx)?),
        Estimator::Naive => None,
    };
    run_sweep(ctx, prediction.as_ref())?;
    finish(ctx)
}

#[derive(Debug, Serialize)]
struct PredictionRecord<'a> {
    case: &'static str,
    speed: String,
    traffic: &'a TrafficModel,
    prediction: &'a DecayPrediction,
}

fn write_prediction(ctx: &Context, p: &DecayPrediction) -> CliResult<()> {
    let record = PredictionRecord {
        case: ctx.regime.case.name(),
        speed: ctx.regime.speed_label(),
        traffic: &ctx.config.traffic,
        prediction: p,
    };
    ctx.out.json("prediction.json", &record)?;
    Ok(())
}

pub fn predict(ctx: &mut Context) -> CliResult<()> {
    let p = predict_with(ctx)?;
    write_prediction(ctx, &p)
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    case: &'static str,
    speed: String,
    estimator: &'static str,
    replications: u64,
    seed: u64,
    tail_budget: f64,
    predicted_decay: f64,
    fitted_decay: f64,
    intercept: f64,
    r_squared: f64,
    /// |fitted − predicted| / predicted.
    relative_gap: f64,
    n_used: &'a [u64],
    n_excluded: &'a [u64],
    n_failed: Vec<u64>,
    alternate: Option<smallbuf::variational::AlternateReading>,
}

fn plot_rows(
    estimates: &[OverflowEstimate],
    p: &DecayPrediction,
    fit: Option<&DecayFit>,
) -> Vec<PlotRow> {
    estimates
        .iter()
        .map(|e| {
            let speed = e.regime.speed(e.n as f64);
            let norm = |x: f64| match speed {
                Some(f) if x > 0.0 => Some(x.ln() / f),
                _ => None,
            };
            PlotRow {
                n: e.n,
                speed,
                normalized_log: e.normalized_log,
                normalized_log_ci_low: norm(e.ci_low),
                normalized_log_ci_high: norm(e.ci_high),
                predicted: Some(-p.decay_rate),
                fitted: fit
                    .zip(speed)
                    .map(|(fit, f)| -(fit.fitted_decay + fit.intercept / f)),
            }
        })
        .collect()
}

pub fn verify(ctx: &mut Context) -> CliResult<()> {
    let p = predict_with(ctx)?;
    write_prediction(ctx, &p)?;
    let estimates = run_sweep(ctx, Some(&p))?;
    if ctx.config.diagnostics.enabled {
        diagnose_into(ctx)?;
    }
    let fit = decay_regression(&estimates, &ctx.regime);
    ctx.out.csv(
        "plot_decay.csv",
        &plot_rows(&estimates, &p, fit.as_ref().ok()),
    )?;
    let fit = fit?;
    let estimator = match ctx.config.estimator {
        Estimator::Naive => "naive",
        Estimator::ImportanceSampled => "importance_sampled",
    };
    let failed = ctx.errors.iter().filter_map(|e| e.n).collect();
    let summary = Summary {
        case: ctx.regime.case.name(),
        speed: ctx.regime.speed_label(),
        estimator,
        replications: ctx.config.replications,
        seed: ctx.config.seed,
        tail_budget: ctx.config.tail_budget,
        predicted_decay: p.decay_rate,
        fitted_decay: fit.fitted_decay,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        relative_gap: (fit.fitted_decay - p.decay_rate).abs() / p.decay_rate,
        n_used: &fit.used,
        n_excluded: &fit.excluded,
        n_failed: failed,
        alternate: p.alternate,
    };
    ctx.out.json("summary.json", &summary)?;
    info!(
        "fitted decay {:.4} vs predicted {:.4} (gap {:.1}%)",
        summary.fitted_decay,
        summary.predicted_decay,
        100.0 * summary.relative_gap
    );
    finish(ctx)
}

/// One line of `diagnostics.jsonl`.
#[derive(Debug, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum DiagnosticsLine<'a> {
    Summary {
        family: &'static str,
        mean_rate: f64,
        verdict: Verdict,
    },
    Check(&'a CheckResult),
    Probe(&'a Probe),
}

fn diagnose_into(ctx: &Context) -> CliResult<DiagnosticsReport> {
    let settings = &ctx.config.diagnostics;
    let mut source = cumulant_source(&ctx.config.traffic, settings.cumulant)?;
    let report = assumption_diagnostics_with(source.as_mut(), &settings.grid)?;
    let mut lines = vec![DiagnosticsLine::Summary {
        family: ctx.config.traffic.family_name(),
        mean_rate: report.mean_rate,
        verdict: report.verdict,
    }];
    lines.extend(report.checks.iter().map(DiagnosticsLine::Check));
    lines.extend(report.probes.iter().map(DiagnosticsLine::Probe));
    ctx.out.jsonl("diagnostics.jsonl", &lines)?;
    Ok(report)
}

pub fn diagnose(ctx: &mut Context) -> CliResult<()> {
    let report = diagnose_into(ctx)?;
    match report.verdict {
        Verdict::Pass => Ok(()),
        Verdict::Warn => {
            warn!("diagnostics are inconclusive on this probe grid");
            Ok(())
        }
        Verdict::Fail => {
            let failed: Vec<String> = report
                .checks
                .iter()
                .filter(|c| c.verdict == Verdict::Fail)
                .map(|c| c.detail.clone())
                .collect();
            Err(smallbuf::Error::Diagnostics(failed.join("; ")).into())
        }
    }
}

/// Reads a two-column (time, value) CSV; a non-numeric first row is a header.
pub fn read_path_file(path: &Path) -> CliResult<PiecewiseLinearPath> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read path file {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliError::Config(format!(
                "{} line {}: expected 2 columns, found {}",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(t), Ok(v)) => {
                times.push(t);
                values.push(v);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{} line {}: not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    PiecewiseLinearPath::new(times, values)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct RateValue {
    reading: Option<LightLoadReading>,
    /// `null` when the rate is infinite.
    value: Option<f64>,
    finite: bool,
}

impl RateValue {
    fn new(reading: Option<LightLoadReading>, value: f64) -> Self {
        Self {
            reading,
            value: value.is_finite().then_some(value),
            finite: value.is_finite(),
        }
    }
}

#[derive(Debug, Serialize)]
struct RateRecord {
    case: &'static str,
    functional: Functional,
    path_points: usize,
    rate: RateValue,
    alternate: Option<RateValue>,
}

fn natural_functional(case: RegimeCase) -> Functional {
    match case {
        RegimeCase::SmallBufferLd => Functional::SmallBufferLd,
        RegimeCase::SmallBufferMd => Functional::SmallBufferMd,
        RegimeCase::LightLoad => Functional::LightLoad,
        RegimeCase::OriginalLd => Functional::Partition,
        RegimeCase::OriginalMd | RegimeCase::Unclassified => Functional::Rkhs,
    }
}

pub fn rate(ctx: &mut Context) -> CliResult<()> {
    let settings = ctx
        .config
        .rate
        .clone()
        .ok_or_else(|| CliError::Config("the rate command needs a [rate] table".into()))?;
    let path = read_path_file(&settings.path_file)?;
    let model = &ctx.config.traffic;
    let functional = settings
        .functional
        .unwrap_or(natural_functional(ctx.regime.case));
    let (rate, alternate) = match functional {
        Functional::SmallBufferLd => (
            RateValue::new(None, rate_small_buffer_ld(&path, model)),
            None,
        ),
        Functional::SmallBufferMd => (
            RateValue::new(None, rate_small_buffer_md(&path, model)),
            None,
        ),
        Functional::LightLoad => {
            let primary = ctx.config.light_load_reading;
            let other = match primary {
                LightLoadReading::ScaledIncrease => LightLoadReading::ValueAtHorizon,
                LightLoadReading::ValueAtHorizon => LightLoadReading::ScaledIncrease,
            };
            let beta = ctx.regime.beta;
            let alt = match rate_light_load(&path, beta, other) {
                Ok(v) => Some(RateValue::new(Some(other), v)),
                Err(e) => {
                    warn!("alternate light-load reading unavailable: {e}");
                    None
                }
            };
            (
                RateValue::new(Some(primary), rate_light_load(&path, beta, primary)?),
                alt,
            )
        }
        Functional::Partition => {
            let horizon = *path.times().last().expect("paths have at least two points");
            let points = path.times().iter().map(|t| t / horizon).collect();
            let partition = Partition::new(points, horizon)?;
            let increments: Vec<f64> = path.values().windows(2).map(|w| w[1] - w[0]).collect();
            let value = rate_original_ld_partition(&increments, &partition, model)?;
            (RateValue::new(None, value), None)
        }
        Functional::Rkhs => {
            let times = &path.times()[1..];
            let cov = covariance_grid(model, times, ctx.config.diagnostics.cumulant)?;
            (
                RateValue::new(None, rate_rkhs(&path.values()[1..], &cov)?),
                None,
            )
        }
    };
    let record = RateRecord {
        case: ctx.regime.case.name(),
        functional,
        path_points: path.times().len(),
        rate,
        alternate,
    };
    ctx.out.json("rate.json", &record)?;
    Ok(())
}
