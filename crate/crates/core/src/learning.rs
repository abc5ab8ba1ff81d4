//! Recursive linear-in-parameter estimators used to tune node weights.
//!
//! * [`RlsState`]: exponentially weighted recursive least squares.
//! * [`KwhState`]: Kaczmarz–Widrow–Hoff projection onto the newest sample.
//! * [`AdaptiveState`]: normalized gradient step with a forgetting gain
//!   accumulator `r`, which interpolates between the two.
//!
//! Every step reports the a-priori prediction `w(k-1) . phi(k)` and the
//! innovation `y(k) - w(k-1) . phi(k)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which `|phi|^2` and the adaptive gain count as zero.
pub const EPS_REG: f64 = 1e-12;

/// Default diffuse initialization `P(0) = P0 * I`.
pub const DEFAULT_P0: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub prediction_before: f64,
    pub error: f64,
}

fn check_dim(expected: usize, phi: &[f64]) -> Result<()> {
    if phi.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: phi.len(),
        });
    }
    Ok(())
}

fn innovation(w: &DVector<f64>, phi: &[f64], y: f64) -> StepResult {
    let prediction_before: f64 = w.iter().zip(phi).map(|(a, b)| a * b).sum();
    StepResult {
        prediction_before,
        error: y - prediction_before,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsState {
    w: DVector<f64>,
    p: DMatrix<f64>,
    alpha: f64,
}

impl RlsState {
    pub fn new(dim: usize, alpha: f64, p0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "RLS forgetting factor must lie in (0, 1], got {alpha}"
            )));
        }
        if !(p0 > 0.0) || !p0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "P0 must be positive, got {p0}"
            )));
        }
        Ok(Self {
            w: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * p0,
            alpha,
        })
    }

    pub fn weights(&self) -> &[f64] {
        self.w.as_slice()
    }

    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One update:
    ///
    /// ```text
    /// w(k) = w(k-1) + P(k-1) phi e / (alpha + phi' P(k-1) phi)
    /// P(k) = P(k-1) - P(k-1) phi phi' P(k-1) / (alpha + phi' P(k-1) phi)
    /// ```
    ///
    /// followed by symmetrization of `P`.
    pub fn step(&mut self, phi: &[f64], y: f64) -> Result<StepResult> {
        check_dim(self.w.len(), phi)?;
        let res = innovation(&self.w, phi, y);
        let phi = DVector::from_column_slice(phi);
        let p_phi = &self.p * &phi;
        let denom = self.alpha + phi.dot(&p_phi);
        self.w.axpy(res.error / denom, &p_phi, 1.0);
        self.p.ger(-1.0 / denom, &p_phi, &p_phi, 1.0);
        let pt = self.p.transpose();
        self.p += pt;
        self.p *= 0.5;
        Ok(res)
    }

    fn extend(&mut self, extra: usize, p0: f64) {
        let m = self.w.len();
        let mut w = DVector::zeros(m + extra);
        w.rows_mut(0, m).copy_from(&self.w);
        let mut p = DMatrix::zeros(m + extra, m + extra);
        p.view_mut((0, 0), (m, m)).copy_from(&self.p);
        for i in m..m + extra {
            p[(i, i)] = p0;
        }
        self.w = w;
        self.p = p;
    }

    fn truncate(&mut self, m: usize) {
        self.w = self.w.rows(0, m).into_owned();
        self.p = self.p.view((0, 0), (m, m)).into_owned();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KwhState {
    w: DVector<f64>,
}

impl KwhState {
    pub fn new(dim: usize) -> Self {
        Self {
            w: DVector::zeros(dim),
        }
    }

    pub fn from_weights(w: &[f64]) -> Self {
        Self {
            w: DVector::from_column_slice(w),
        }
    }

    pub fn weights(&self) -> &[f64] {
        self.w.as_slice()
    }

    /// `w(k) = w(k-1) + e phi / |phi|^2`.
    pub fn step(&mut self, phi: &[f64], y: f64) -> Result<StepResult> {
        check_dim(self.w.len(), phi)?;
        let norm_sq: f64 = phi.iter().map(|v| v * v).sum();
        if norm_sq <= EPS_REG {
            return Err(Error::ZeroRegressor { norm_sq });
        }
        let res = innovation(&self.w, phi, y);
        let scale = res.error / norm_sq;
        for (w, p) in self.w.iter_mut().zip(phi) {
            *w += scale * p;
        }
        Ok(res)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    w: DVector<f64>,
    r: f64,
    alpha: f64,
}

impl AdaptiveState {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        Self::with_gain(dim, alpha, 0.0)
    }

    pub fn with_gain(dim: usize, alpha: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "adaptive forgetting factor must lie in [0, 1], got {alpha}"
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gain must be nonnegative, got {r}"
            )));
        }
        Ok(Self {
            w: DVector::zeros(dim),
            r,
            alpha,
        })
    }

    pub fn weights(&self) -> &[f64] {
        self.w.as_slice()
    }

    pub fn gain(&self) -> f64 {
        self.r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Refreshes the gain first, `r(k) = alpha r(k-1) + |phi|^2`, then steps
    /// `w(k) = w(k-1) + e phi / r(k)`. On `ZeroGain` the state is untouched.
    pub fn step(&mut self, phi: &[f64], y: f64) -> Result<StepResult> {
        check_dim(self.w.len(), phi)?;
        let norm_sq: f64 = phi.iter().map(|v| v * v).sum();
        let r = self.alpha * self.r + norm_sq;
        if r <= EPS_REG {
            return Err(Error::ZeroGain { gain: r });
        }
        let res = innovation(&self.w, phi, y);
        self.r = r;
        let scale = res.error / r;
        for (w, p) in self.w.iter_mut().zip(phi) {
            *w += scale * p;
        }
        Ok(res)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Rls,
    Kwh,
    Adaptive,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rls" => Ok(Self::Rls),
            "kwh" => Ok(Self::Kwh),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown learner '{other}'"))),
        }
    }
}

/// Hyperparameters needed to create a fresh learner of a given kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub alpha: f64,
    pub p0: f64,
}

impl LearnerSpec {
    pub fn build(&self, dim: usize) -> Result<Learner> {
        Ok(match self.kind {
            LearnerKind::Rls => Learner::Rls(RlsState::new(dim, self.alpha, self.p0)?),
            LearnerKind::Kwh => Learner::Kwh(KwhState::new(dim)),
            LearnerKind::Adaptive => Learner::Adaptive(AdaptiveState::new(dim, self.alpha)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.build(1).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Rls(RlsState),
    Kwh(KwhState),
    Adaptive(AdaptiveState),
}

impl Learner {
    pub fn step(&mut self, phi: &[f64], y: f64) -> Result<StepResult> {
        match self {
            Learner::Rls(s) => s.step(phi, y),
            Learner::Kwh(s) => s.step(phi, y),
            Learner::Adaptive(s) => s.step(phi, y),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Learner::Rls(s) => s.weights(),
            Learner::Kwh(s) => s.weights(),
            Learner::Adaptive(s) => s.weights(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights().len()
    }

    /// Scalar gains carried besides the weights (the adaptive `r`).
    pub fn scalar_gains(&self) -> usize {
        match self {
            Learner::Adaptive(_) => 1,
            _ => 0,
        }
    }

    /// Appends `extra` zero weights. A new RLS block starts at `p0 * I` with
    /// no coupling to the existing block.
    pub fn extend(&mut self, extra: usize, p0: f64) {
        match self {
            Learner::Rls(s) => s.extend(extra, p0),
            Learner::Kwh(s) => s.w = s.w.clone().resize_vertically(s.w.len() + extra, 0.0),
            Learner::Adaptive(s) => s.w = s.w.clone().resize_vertically(s.w.len() + extra, 0.0),
        }
    }

    /// Keeps the leading `m` weights (and the matching block of `P`).
    pub fn truncate(&mut self, m: usize) {
        match self {
            Learner::Rls(s) => s.truncate(m),
            Learner::Kwh(s) => s.w = s.w.rows(0, m).into_owned(),
            Learner::Adaptive(s) => s.w = s.w.rows(0, m).into_owned(),
        }
    }
}

pub fn rls_step(state: &mut RlsState, phi: &[f64], y: f64) -> Result<StepResult> {
    state.step(phi, y)
}

pub fn kwh_step(state: &mut KwhState, phi: &[f64], y: f64) -> Result<StepResult> {
    state.step(phi, y)
}

pub fn adaptive_step(state: &mut AdaptiveState, phi: &[f64], y: f64) -> Result<StepResult> {
    state.step(phi, y)
}
