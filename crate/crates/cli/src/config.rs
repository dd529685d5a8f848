//! Experiment configuration: a TOML file selecting the experiment kind, the
//! channel parameters, and the sweep grids.

use kmimo_core::channel::ChannelParams;
use kmimo_core::rates::{Regularizer, Scheme};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Gains,
    Convergence,
    RatesUl,
    RatesDl,
    Gap,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gains" => ExperimentKind::Gains,
            "convergence" => ExperimentKind::Convergence,
            "rates-ul" => ExperimentKind::RatesUl,
            "rates-dl" => ExperimentKind::RatesDl,
            "gap" => ExperimentKind::Gap,
            _ => return None,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: u64,
    out: Option<String>,
    format: Option<String>,
    channel: RawChannel,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    m: usize,
    k: Option<usize>,
    #[serde(default)]
    a: f64,
    #[serde(default)]
    tau: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    #[serde(default)]
    schemes: Vec<String>,
    #[serde(default)]
    snr_db: Vec<f64>,
    #[serde(default)]
    budget_mk: Vec<f64>,
    regularizer: Option<toml::Value>,
    k_grid: Option<Vec<usize>>,
    opt_iters: Option<usize>,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> u64 {
    100
}

/// Validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: u64,
    pub out: Option<String>,
    pub format: Option<OutputFormat>,
    pub m: usize,
    pub k: usize,
    pub a: f64,
    pub tau: f64,
    pub schemes: Vec<Scheme>,
    pub snr_grid: Vec<f64>,
    pub budget_grid: Vec<f64>,
    pub regularizer: Regularizer,
    pub k_grid: Vec<usize>,
    pub opt_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        let kind = ExperimentKind::parse(&raw.kind)
            .ok_or_else(|| CliError::Config(format!("unknown experiment kind '{}'", raw.kind)))?;
        let format = match &raw.format {
            None => None,
            Some(f) => Some(
                OutputFormat::parse(f)
                    .ok_or_else(|| CliError::Config(format!("unknown format '{f}'")))?,
            ),
        };
        let k = match (kind, raw.channel.k) {
            (ExperimentKind::Gains, k) => k.unwrap_or(0),
            (_, Some(k)) => k,
            (_, None) => return Err(CliError::Config("channel.k is required".into())),
        };
        let schemes = raw
            .experiment
            .schemes
            .iter()
            .map(|s| {
                Scheme::parse(s)
                    .ok_or_else(|| CliError::Config(format!("unknown scheme '{s}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let regularizer = match &raw.experiment.regularizer {
            None => Regularizer::Mmse,
            Some(toml::Value::String(s)) => match s.as_str() {
                "zf" => Regularizer::Zf,
                "mmse" => Regularizer::Mmse,
                other => {
                    return Err(CliError::Config(format!("unknown regularizer '{other}'")))
                }
            },
            Some(toml::Value::Float(v)) => Regularizer::Fixed(*v),
            Some(toml::Value::Integer(v)) => Regularizer::Fixed(*v as f64),
            Some(other) => {
                return Err(CliError::Config(format!("bad regularizer value: {other}")))
            }
        };

        let mut snr_grid = raw.experiment.snr_db;
        if snr_grid.is_empty() {
            snr_grid.push(20.0);
        }
        let mut budget_grid = raw.experiment.budget_mk;
        if budget_grid.is_empty() {
            budget_grid.push(40.0);
        }
        budget_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite budgets"));

        let config = Self {
            kind,
            seed: raw.seed,
            trials: raw.trials,
            out: raw.out,
            format,
            m: raw.channel.m,
            k,
            a: raw.channel.a,
            tau: raw.channel.tau,
            schemes,
            snr_grid,
            budget_grid,
            regularizer,
            k_grid: raw.experiment.k_grid.unwrap_or_default(),
            opt_iters: raw.experiment.opt_iters.unwrap_or(2000),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.trials < 1 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.snr_grid.is_empty() || self.budget_grid.is_empty() {
            return Err(CliError::Config("grids must be nonempty".into()));
        }
        match self.kind {
            ExperimentKind::Gains => {
                if self.k_grid.is_empty() {
                    return Err(CliError::Config(
                        "gains experiments need experiment.k_grid".into(),
                    ));
                }
            }
            _ => {
                if self.schemes.is_empty() {
                    return Err(CliError::Config("experiment.schemes must be nonempty".into()));
                }
                self.channel_params(self.snr_grid[0])
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn channel_params(&self, snr_db: f64) -> ChannelParams {
        ChannelParams { m: self.m, k: self.k, a: self.a, tau: self.tau, snr_db }
    }
}
