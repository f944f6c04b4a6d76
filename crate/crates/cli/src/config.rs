//! Experiment configuration files and their merge with command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tets_core::inventory::NewsvendorConfig;
use tets_core::simulation::{case_spec, CASE_LEVEL};
use tets_core::ModelSpec;

use crate::error::{file_error, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Saturation,
    DailyCensoring,
    Newsvendor,
}

/// Every field is optional; absent fields fall back to the case defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    /// Demand-generating model for `simulate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub days: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censor_levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_csl: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_days: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(file_error(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_optional(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: ExperimentConfig) -> Self {
        let base = self;
        overlay_fields!(base, top; case, spec, initial_level, seed, n, days, censor_levels,
            target_csl, replications, refit_every, warmup_days, restarts, out)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Fills every field the given case reads with its effective value.
    pub fn resolved(&self, case: Case) -> CliResult<Self> {
        let mut r = self.clone();
        r.case = Some(case);
        r.seed.get_or_insert(0);
        r.out.get_or_insert_with(|| PathBuf::from("."));
        match case {
            Case::Saturation | Case::DailyCensoring => {
                r.spec.get_or_insert_with(case_spec);
                r.initial_level.get_or_insert(CASE_LEVEL);
                r.n.get_or_insert(1440);
                r.censor_levels.get_or_insert_with(|| match case {
                    Case::Saturation => vec![12.5],
                    _ => vec![140.0, 80.0],
                });
            }
            Case::Newsvendor => {
                let d = NewsvendorConfig::default();
                r.days.get_or_insert(d.days);
                r.target_csl.get_or_insert_with(|| vec![0.8, 0.9, 0.95, 0.99]);
                r.replications.get_or_insert(1);
                r.refit_every.get_or_insert(d.refit_every);
                r.warmup_days.get_or_insert(d.warmup_days);
                r.restarts.get_or_insert(d.restarts);
            }
        }
        if r.censor_levels.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(CliError::Config("at least one censor level is required".into()));
        }
        if r.target_csl.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(CliError::Config("at least one target CSL is required".into()));
        }
        if r.replications == Some(0) {
            return Err(CliError::Config("replications must be >= 1".into()));
        }
        Ok(r)
    }
}
