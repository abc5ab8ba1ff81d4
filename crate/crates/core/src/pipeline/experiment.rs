//! Train/test protocol and forecast reports.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anarx::{InputMode, ModelConfig, StructureChange};
use crate::error::{Error, Result};
use crate::forecaster::{Forecaster, ForecasterConfig};

use super::config::{Normalization, RunConfig};
use super::data::{MinMax, SeriesFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub k: usize,
    pub segment: Segment,
    pub y: f64,
    pub y_hat: f64,
    pub error: f64,
    pub n_active: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change: Option<StructureChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rmse_train: f64,
    pub rmse_test: f64,
    /// Node weights plus ensemble weights.
    pub parameter_count: usize,
    /// Also counts the scalar gains of adaptive learners.
    pub parameter_count_with_gains: usize,
    pub wall_time_s: f64,
    pub train_steps_scored: usize,
    pub test_steps_scored: usize,
    pub n_final: usize,
    pub structure_changes: usize,
    pub skipped_node_updates: usize,
    pub skipped_combiner_updates: usize,
    /// Min-max range of the target, if scaled; RMSE values are in scaled units.
    pub scale: Option<MinMax>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    #[serde(flatten)]
    pub summary: Summary,
    pub config: RunConfig,
    pub records: Vec<StepRecord>,
}

impl ForecastReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Per-step CSV: `k, y, y_hat, error, n_active` and, when weighted,
    /// `c_1..c_n` for the largest `n` seen (blank where a node was absent).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let width = self
            .records
            .iter()
            .filter_map(|r| r.c.as_ref().map(Vec::len))
            .max()
            .unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["k", "y", "y_hat", "error", "n_active"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=width).map(|i| format!("c_{i}")));
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.records {
            let mut row = vec![
                r.k.to_string(),
                r.y.to_string(),
                r.y_hat.to_string(),
                r.error.to_string(),
                r.n_active.to_string(),
            ];
            let c = r.c.as_deref().unwrap_or(&[]);
            row.extend((0..width).map(|i| c.get(i).map(f64::to_string).unwrap_or_default()));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// A trained forecaster together with the scaling needed to feed it raw
/// observations. This is what snapshots persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub config: RunConfig,
    pub scale_y: Option<MinMax>,
    pub scale_x: Option<MinMax>,
    pub forecaster: Forecaster,
}

impl ModelState {
    /// Untrained model. Scaling and grid ranges come from `input_lo/input_hi`
    /// (or `[0, 1]` when absent).
    pub fn fresh(config: &RunConfig, mode: InputMode) -> Result<Self> {
        let range = match (config.input_lo, config.input_hi) {
            (Some(lo), Some(hi)) => MinMax { lo, hi },
            _ => MinMax { lo: 0.0, hi: 1.0 },
        };
        let (scale, grid) = match config.normalization {
            Normalization::Minmax => (Some(range), (0.0, 1.0)),
            Normalization::None => (None, (range.lo, range.hi)),
        };
        let forecaster = Forecaster::new(&forecaster_config(config, mode, grid, grid))?;
        Ok(Self {
            config: config.clone(),
            scale_y: scale,
            scale_x: scale.filter(|_| mode == InputMode::Narx),
            forecaster,
        })
    }

    fn to_model_y(&self, v: f64) -> f64 {
        self.scale_y.map_or(v, |s| s.apply(v))
    }

    fn to_model_x(&self, v: f64) -> f64 {
        self.scale_x.map_or(v, |s| s.apply(v))
    }

    fn to_raw_y(&self, u: f64) -> f64 {
        self.scale_y.map_or(u, |s| s.invert(u))
    }

    /// Forecast of the next observation in raw units.
    pub fn predict_next_raw(&self) -> Result<f64> {
        Ok(self.to_raw_y(self.forecaster.predict_next()?))
    }

    /// Feeds one raw observation and returns the raw forecast of the next.
    pub fn ingest_raw(&mut self, y: f64, x: f64, learn: bool) -> Result<f64> {
        let (y, x) = (self.to_model_y(y), self.to_model_x(x));
        self.forecaster.step(y, x, learn)?;
        self.predict_next_raw()
    }
}

fn forecaster_config(
    config: &RunConfig,
    mode: InputMode,
    y_range: (f64, f64),
    x_range: (f64, f64),
) -> ForecasterConfig {
    ForecasterConfig {
        model: ModelConfig {
            node_kind: config.node_kind,
            n_nodes: config.n_nodes,
            h: config.h,
            q: config.q,
            y_range,
            x_range,
            learner: config.learner_spec(),
            training: config.training(),
            mode,
            max_lag: config.max_lag(),
        },
        head: config.head(),
        evolution: config.evolution,
    }
}

fn grid_range(config: &RunConfig, train: &[f64]) -> (f64, f64) {
    if let (Some(lo), Some(hi)) = (config.input_lo, config.input_hi) {
        return (lo, hi);
    }
    let lo = train.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn rmse(sum_sq: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        (sum_sq / count as f64).sqrt()
    }
}

/// Runs the online protocol and returns the report.
pub fn run_experiment(
    series: &SeriesFrame,
    exog: Option<&SeriesFrame>,
    config: &RunConfig,
) -> Result<ForecastReport> {
    run_experiment_with_state(series, exog, config).map(|(report, _)| report)
}

/// Streams the first `train_len` points with learning on, then `test_len`
/// points (learning stays on unless `freeze_test`). The first `n_nodes`
/// steps, where some lags are still missing, are not scored.
pub fn run_experiment_with_state(
    series: &SeriesFrame,
    exog: Option<&SeriesFrame>,
    config: &RunConfig,
) -> Result<(ForecastReport, ModelState)> {
    config.validate()?;
    let total = config.train_len + config.test_len;
    if total > series.len() {
        return Err(Error::InvalidConfig(format!(
            "train_len + test_len = {total} exceeds series length {}",
            series.len()
        )));
    }
    if let Some(x) = exog {
        if x.len() < total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: x.len(),
            });
        }
    }
    let mode = if exog.is_some() {
        InputMode::Narx
    } else {
        InputMode::Nar
    };
    let train = 0..config.train_len;
    let ys = &series.values[..total];
    let xs = exog.map(|x| &x.values[..total]);

    let start = Instant::now();
    let (scale_y, scale_x, y_range, x_range) = match config.normalization {
        Normalization::Minmax => {
            let sy = MinMax::fit(&ys[train.clone()])?;
            let sx = xs.map(|x| MinMax::fit(&x[train.clone()])).transpose()?;
            (Some(sy), sx, (0.0, 1.0), (0.0, 1.0))
        }
        Normalization::None => {
            let yr = grid_range(config, &ys[train.clone()]);
            let xr = xs.map_or(yr, |x| grid_range(config, &x[train.clone()]));
            (None, None, yr, xr)
        }
    };
    let mut forecaster = Forecaster::new(&forecaster_config(config, mode, y_range, x_range))?;

    let mut records = Vec::with_capacity(total);
    let (mut sq_train, mut sq_test) = (0.0, 0.0);
    let (mut n_train, mut n_test) = (0, 0);
    let (mut changes, mut skipped_nodes, mut skipped_combiner) = (0, 0, 0);
    for i in 0..total {
        let k = i + 1;
        let segment = if i < config.train_len {
            Segment::Train
        } else {
            Segment::Test
        };
        let y = scale_y.map_or(ys[i], |s| s.apply(ys[i]));
        let x = match (xs, scale_x) {
            (Some(x), Some(s)) => s.apply(x[i]),
            (Some(x), None) => x[i],
            (None, _) => 0.0,
        };
        let learn = segment == Segment::Train || !config.freeze_test;
        let outcome = forecaster.step(y, x, learn).map_err(|e| e.at_step(k))?;
        if !outcome.prediction.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "non-finite prediction {}",
                outcome.prediction
            ))
            .at_step(k));
        }
        for failure in &outcome.failures {
            log::debug!(
                "step {k}: node {:?} update skipped: {}",
                failure.node,
                failure.error
            );
        }
        if let Some(e) = &outcome.combiner_failure {
            log::debug!("step {k}: combiner update skipped: {e}");
            skipped_combiner += 1;
        }
        skipped_nodes += outcome.failures.len();
        let change = (outcome.change != StructureChange::None).then_some(outcome.change);
        if let Some(c) = change {
            log::info!("step {k}: structure change {c:?}, n = {}", outcome.n);
            changes += 1;
        }

        let e2 = outcome.error * outcome.error;
        match segment {
            Segment::Train if k > config.n_nodes => {
                sq_train += e2;
                n_train += 1;
            }
            Segment::Train => {}
            Segment::Test => {
                sq_test += e2;
                n_test += 1;
            }
        }
        let (c, lambda) = match outcome.weights {
            Some((c, l)) => (Some(c), Some(l)),
            None => (None, None),
        };
        records.push(StepRecord {
            k,
            segment,
            y,
            y_hat: outcome.prediction,
            error: outcome.error,
            n_active: outcome.active,
            c,
            lambda,
            change,
        });
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    let summary = Summary {
        rmse_train: rmse(sq_train, n_train),
        rmse_test: rmse(sq_test, n_test),
        parameter_count: forecaster.parameter_count(),
        parameter_count_with_gains: forecaster.parameter_count_with_gains(),
        wall_time_s,
        train_steps_scored: n_train,
        test_steps_scored: n_test,
        n_final: forecaster.model().n(),
        structure_changes: changes,
        skipped_node_updates: skipped_nodes,
        skipped_combiner_updates: skipped_combiner,
        scale: scale_y,
    };
    log::info!(
        "rmse_train = {:.6}, rmse_test = {:.6}, {:.3} s",
        summary.rmse_train,
        summary.rmse_test,
        wall_time_s
    );
    let state = ModelState {
        config: config.clone(),
        scale_y,
        scale_x,
        forecaster,
    };
    Ok((
        ForecastReport {
            summary,
            config: config.clone(),
            records,
        },
        state,
    ))
}
