//! Streaming forecaster: an [`AnarxModel`] with an optional weighted
//! ensemble head and optional structural evolution.

use serde::{Deserialize, Serialize};

use crate::anarx::{
    evolve, AnarxModel, ErrorMonitor, EvolutionPolicy, ModelConfig, NodeFailure, StructureChange,
    TrainingMode,
};
use crate::combiner::{batch_solve, CombinerState, ErrorCorrelation};
use crate::error::{Error, Result};

/// How the ensemble weights are updated online.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CombinerMethod {
    ArrowHurwicz {
        eta_c: f64,
    },
    Optimal,
    /// Re-solve the constrained problem on the accumulated correlation.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub method: CombinerMethod,
    pub eta_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterConfig {
    pub model: ModelConfig,
    pub head: Option<HeadConfig>,
    pub evolution: Option<EvolutionPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHead {
    state: CombinerState,
    corr: ErrorCorrelation,
    method: CombinerMethod,
}

impl WeightedHead {
    pub fn new(n: usize, config: &HeadConfig) -> Result<Self> {
        if let CombinerMethod::ArrowHurwicz { eta_c } = config.method {
            if !(eta_c > 0.0) || !eta_c.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "eta_c must be positive, got {eta_c}"
                )));
            }
        }
        Ok(Self {
            state: CombinerState::new(n, config.eta_lambda)?,
            corr: ErrorCorrelation::new(n),
            method: config.method,
        })
    }

    pub fn state(&self) -> &CombinerState {
        &self.state
    }

    pub fn correlation(&self) -> &ErrorCorrelation {
        &self.corr
    }

    pub fn method(&self) -> CombinerMethod {
        self.method
    }

    fn update(&mut self, forecasts: &[f64], y: f64) -> Result<()> {
        self.corr.accumulate(y, forecasts)?;
        match self.method {
            CombinerMethod::ArrowHurwicz { eta_c } => {
                self.state.arrow_hurwicz_step(forecasts, y, eta_c)
            }
            CombinerMethod::Optimal => self.state.optimal_step(forecasts, y),
            CombinerMethod::Batch => {
                let solution = batch_solve(&self.corr)?;
                self.state.set_weights(solution.c)
            }
        }
    }

    fn grow(&mut self) {
        self.state.grow();
        self.corr.grow();
    }

    fn shrink(&mut self) {
        self.state.shrink();
        self.corr.shrink();
    }
}

/// Outcome of one streaming step.
#[derive(Debug)]
pub struct StepOutcome {
    /// One-step-ahead forecast made before `y` was seen.
    pub prediction: f64,
    pub error: f64,
    pub active: usize,
    /// Node count after any structure change.
    pub n: usize,
    /// Ensemble weights and multiplier after the update, if weighted.
    pub weights: Option<(Vec<f64>, f64)>,
    pub change: StructureChange,
    pub failures: Vec<NodeFailure>,
    /// A skipped combiner update (degenerate step or singular correlation).
    pub combiner_failure: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    model: AnarxModel,
    head: Option<WeightedHead>,
    evolution: Option<(EvolutionPolicy, ErrorMonitor)>,
}

impl Forecaster {
    pub fn new(config: &ForecasterConfig) -> Result<Self> {
        if config.head.is_some() && config.model.training != TrainingMode::Independent {
            return Err(Error::InvalidConfig(
                "the weighted model requires independent training".into(),
            ));
        }
        let model = AnarxModel::new(&config.model)?;
        let head = config
            .head
            .as_ref()
            .map(|h| WeightedHead::new(model.n(), h))
            .transpose()?;
        let evolution = match config.evolution {
            Some(policy) => {
                policy.validate()?;
                if !(policy.n_min..=policy.n_max).contains(&model.n()) {
                    return Err(Error::InvalidConfig(format!(
                        "n_nodes = {} outside evolution bounds [{}, {}]",
                        model.n(),
                        policy.n_min,
                        policy.n_max
                    )));
                }
                Some((policy, ErrorMonitor::new(policy.window, model.n())))
            }
            None => None,
        };
        Ok(Self {
            model,
            head,
            evolution,
        })
    }

    pub fn model(&self) -> &AnarxModel {
        &self.model
    }

    pub fn head(&self) -> Option<&WeightedHead> {
        self.head.as_ref()
    }

    pub fn is_weighted(&self) -> bool {
        self.head.is_some()
    }

    /// Forecast of the next observation from the current delay lines.
    pub fn predict_next(&self) -> Result<f64> {
        let forecasts = self.model.node_forecasts()?;
        match &self.head {
            Some(head) => head.state.combine(&forecasts),
            None => Ok(forecasts.iter().sum()),
        }
    }

    /// Forecasts `y`, then (if `learn`) updates nodes, combiner and
    /// structure, and finally shifts `(y, x)` into the delay lines.
    pub fn step(&mut self, y: f64, x: f64, learn: bool) -> Result<StepOutcome> {
        let report = if learn {
            self.model.train_step(y, x)?
        } else {
            self.model.observe(y, x)?
        };
        let forecasts = report.node_forecasts;
        let n_before = forecasts.len();
        let (prediction, contributions) = match &self.head {
            Some(head) => {
                let c = head.state.weights();
                let contributions: Vec<f64> =
                    c.iter().zip(&forecasts).map(|(c, f)| c * f).collect();
                (contributions.iter().sum(), contributions)
            }
            None => (report.prediction, forecasts.clone()),
        };
        let error = y - prediction;

        let mut combiner_failure = None;
        if let Some(head) = &mut self.head {
            if learn && report.active == n_before {
                if let Err(e) = head.update(&forecasts, y) {
                    match e {
                        Error::DegenerateStep { .. } | Error::SingularCorrelation => {
                            combiner_failure = Some(e)
                        }
                        other => return Err(other),
                    }
                }
            }
        }

        let mut change = StructureChange::None;
        if let (true, Some((policy, monitor))) = (learn, &mut self.evolution) {
            monitor.record(error, &contributions);
            change = evolve(&mut self.model, policy, monitor)?;
            if change != StructureChange::None {
                self.sync_structure();
            }
        }

        Ok(StepOutcome {
            prediction,
            error,
            active: report.active,
            n: self.model.n(),
            weights: self
                .head
                .as_ref()
                .map(|h| (h.state.weights().to_vec(), h.state.lambda())),
            change,
            failures: report.failures,
            combiner_failure,
        })
    }

    /// Appends a zero-weight node; the next forecast is unchanged.
    pub fn add_node(&mut self) -> Result<()> {
        self.model.add_node()?;
        self.sync_structure();
        Ok(())
    }

    pub fn remove_last_node(&mut self) -> Result<()> {
        self.model.remove_last_node()?;
        self.sync_structure();
        Ok(())
    }

    fn sync_structure(&mut self) {
        let n = self.model.n();
        if let Some(head) = &mut self.head {
            while head.state.dim() < n {
                head.grow();
            }
            while head.state.dim() > n {
                head.shrink();
            }
        }
        if let Some((_, monitor)) = &mut self.evolution {
            monitor.reset_window(n);
        }
    }

    /// Adjustable weights: node weights plus ensemble weights.
    pub fn parameter_count(&self) -> usize {
        self.model.weight_count() + self.head.as_ref().map_or(0, |h| h.state.dim())
    }

    /// [`Self::parameter_count`] plus the learners' scalar gains.
    pub fn parameter_count_with_gains(&self) -> usize {
        self.parameter_count() + self.model.gain_count()
    }

    pub fn check_invariants(&self) -> Result<()> {
        self.model.check_invariants()?;
        if let Some(head) = &self.head {
            let n = self.model.n();
            if head.state.dim() != n || head.corr.dim() != n {
                return Err(Error::CorruptSnapshot(
                    "combiner dimension differs from node count".into(),
                ));
            }
        }
        Ok(())
    }
}
