//! Experiment configuration, read from a flat TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anarx::{EvolutionPolicy, NodeKind, TrainingMode};
use crate::combiner::DEFAULT_ETA_LAMBDA;
use crate::error::{Error, Result};
use crate::forecaster::{CombinerMethod, HeadConfig};
use crate::learning::{LearnerKind, LearnerSpec, DEFAULT_P0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Minmax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    #[default]
    ArrowHurwicz,
    Optimal,
    Batch,
}

fn default_q() -> usize {
    2
}

fn default_eta() -> f64 {
    0.1
}

fn default_eta_lambda() -> f64 {
    DEFAULT_ETA_LAMBDA
}

fn default_p0() -> f64 {
    DEFAULT_P0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_node_kind")]
    pub node_kind: NodeKind,
    pub learner: LearnerKind,
    pub alpha: f64,
    pub n_nodes: usize,
    pub h: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub weighted: bool,
    /// Defaults to independent when weighted, stacked otherwise.
    #[serde(default)]
    pub training: Option<TrainingMode>,
    pub train_len: usize,
    pub test_len: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub evolution: Option<EvolutionPolicy>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub combiner: CombinerKind,
    #[serde(default = "default_eta")]
    pub eta_c: f64,
    #[serde(default = "default_eta_lambda")]
    pub eta_lambda: f64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default)]
    pub freeze_test: bool,
    /// Grid range used when normalization is off.
    #[serde(default)]
    pub input_lo: Option<f64>,
    #[serde(default)]
    pub input_hi: Option<f64>,
    /// Delay-line length; defaults to the evolution ceiling or `n_nodes`.
    #[serde(default)]
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default)]
    pub exog_column: Option<String>,
}

fn default_node_kind() -> NodeKind {
    NodeKind::NeoFuzzy
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file; a relative `data` path is taken relative to it.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(data), Some(dir)) = (&config.data, path.parent()) {
            if data.is_relative() {
                config.data = Some(dir.join(data));
            }
        }
        Ok(config)
    }

    pub fn training(&self) -> TrainingMode {
        self.training.unwrap_or(if self.weighted {
            TrainingMode::Independent
        } else {
            TrainingMode::Stacked
        })
    }

    pub fn learner_spec(&self) -> LearnerSpec {
        LearnerSpec {
            kind: self.learner,
            alpha: self.alpha,
            p0: self.p0,
        }
    }

    pub fn head(&self) -> Option<HeadConfig> {
        self.weighted.then_some(HeadConfig {
            method: match self.combiner {
                CombinerKind::ArrowHurwicz => CombinerMethod::ArrowHurwicz { eta_c: self.eta_c },
                CombinerKind::Optimal => CombinerMethod::Optimal,
                CombinerKind::Batch => CombinerMethod::Batch,
            },
            eta_lambda: self.eta_lambda,
        })
    }

    pub fn max_lag(&self) -> usize {
        let ceiling = self.evolution.map_or(self.n_nodes, |p| p.n_max);
        self.max_lag
            .unwrap_or(ceiling)
            .max(ceiling)
            .max(self.n_nodes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_nodes == 0 || self.h == 0 || self.q == 0 {
            return bad("n_nodes, h and q must be positive".into());
        }
        if self.node_kind == NodeKind::NeoFuzzy && self.q > self.h {
            return Err(Error::InvalidOrder {
                h: self.h,
                q: self.q,
            });
        }
        if self.train_len == 0 || self.test_len == 0 {
            return bad("train_len and test_len must be positive".into());
        }
        if self.weighted && self.training() != TrainingMode::Independent {
            return bad("weighted = true requires training = \"independent\"".into());
        }
        self.learner_spec().validate()?;
        if self.weighted && !(self.eta_lambda > 0.0) {
            return bad(format!(
                "eta_lambda must be positive, got {}",
                self.eta_lambda
            ));
        }
        if self.weighted && self.combiner == CombinerKind::ArrowHurwicz && !(self.eta_c > 0.0) {
            return bad(format!("eta_c must be positive, got {}", self.eta_c));
        }
        if let Some(policy) = &self.evolution {
            policy.validate()?;
            if !(policy.n_min..=policy.n_max).contains(&self.n_nodes) {
                return bad("n_nodes must lie within [n_min, n_max]".into());
            }
        }
        match (self.input_lo, self.input_hi) {
            (Some(lo), Some(hi)) if !(lo < hi) => return Err(Error::InvalidRange { lo, hi }),
            (Some(_), None) | (None, Some(_)) => {
                return bad("input_lo and input_hi must be given together".into())
            }
            _ => {}
        }
        Ok(())
    }
}
