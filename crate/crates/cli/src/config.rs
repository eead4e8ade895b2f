//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! replications = 20000
//! tail_budget = 1e-9
//! estimator = "importance_sampled"   # or "naive"
//! n_sweep = [64, 128, 256, 512, 1024]
//!
//! [traffic.process]
//! family = "poisson"
//! rate = 1.0
//!
//! [traffic.marks]
//! law = "unit"
//!
//! [regime]
//! alpha = 0.6
//! beta = 0.8
//! buffer = 1.0
//! capacity = 1.0
//! ```
//!
//! Optional tables: `[output]` (`dir`), `[diagnostics]` (`enabled`, `grid`,
//! `cumulant`) and `[rate]` (`path_file`, `functional`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smallbuf::ratefn::{EvalMode, LightLoadReading, ProbeGrid};
use smallbuf::{ScalingRegime, TrafficModel};

use crate::error::{CliError, CliResult};

/// Which estimator `simulate` and `verify` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Naive,
    #[default]
    ImportanceSampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSettings {
    pub alpha: f64,
    pub beta: f64,
    pub buffer: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSettings {
    /// Whether `verify` also writes a diagnostics report.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub grid: ProbeGrid,
    /// How Λ_t is evaluated for the probes.
    #[serde(default)]
    pub cumulant: EvalMode,
}

/// Rate functional evaluated by `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    SmallBufferLd,
    SmallBufferMd,
    LightLoad,
    /// Finite-partition rate for independent-increment traffic.
    Partition,
    /// Gaussian rate with the traffic's covariance at the path breakpoints.
    Rkhs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSettings {
    /// Two-column CSV (time, value); relative paths resolve against the
    /// config file's directory.
    pub path_file: PathBuf,
    /// Defaults to the functional natural for the regime.
    pub functional: Option<Functional>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub traffic: TrafficModel,
    pub regime: RegimeSettings,
    #[serde(default)]
    pub n_sweep: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tail_budget")]
    pub tail_budget: f64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub light_load_reading: LightLoadReading,
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsSettings,
    pub rate: Option<RateSettings>,
}

fn default_replications() -> u64 {
    10_000
}

fn default_tail_budget() -> f64 {
    1e-9
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; a relative `rate.path_file` is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        if let (Some(rate), Some(dir)) = (config.rate.as_mut(), path.parent()) {
            if rate.path_file.is_relative() {
                rate.path_file = dir.join(&rate.path_file);
            }
        }
        Ok(config)
    }

    /// Checks every invariant that does not depend on the command.
    pub fn validate(&self) -> CliResult<ScalingRegime> {
        self.traffic.validate()?;
        let r = self.regime;
        let regime = ScalingRegime::new(r.alpha, r.beta, r.buffer, r.capacity)?;
        regime.require_classified()?;
        if self.replications < 100 {
            return Err(CliError::Config(format!(
                "replications must be at least 100, got {}",
                self.replications
            )));
        }
        if !(self.tail_budget > 0.0 && self.tail_budget <= 0.1) {
            return Err(CliError::Config(format!(
                "tail_budget must lie in (0, 0.1], got {}",
                self.tail_budget
            )));
        }
        if self.n_sweep.first() == Some(&0) {
            return Err(CliError::Config("n_sweep entries must be positive".into()));
        }
        if self.n_sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "n_sweep must be strictly increasing".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(regime)
    }

    pub fn require_sweep(&self) -> CliResult<()> {
        if self.n_sweep.is_empty() {
            return Err(CliError::Config("n_sweep is empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        n_sweep = [64, 128]
        [traffic.process]
        family = "poisson"
        rate = 1.0
        [traffic.marks]
        law = "unit"
        [regime]
        alpha = 0.6
        beta = 0.8
        buffer = 1.0
        capacity = 1.0
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.replications, 10_000);
        assert_eq!(c.estimator, Estimator::ImportanceSampled);
        assert_eq!(c.output.dir, PathBuf::from("results"));
        assert!(!c.diagnostics.enabled);
        c.validate().unwrap();
    }

    #[test]
    fn sweep_must_increase() {
        let text = MINIMAL.replace("[64, 128]", "[128, 64]");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn budget_is_capped() {
        let text = format!("tail_budget = 0.5\n{MINIMAL}");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("replicas = 5\n{MINIMAL}");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn unclassified_regime_is_unsupported() {
        let text = MINIMAL.replace("alpha = 0.6", "alpha = 0.1");
        let err = ExperimentConfig::from_toml(&text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("five regimes"));
    }
}
