//! Convexity-constrained combination of per-node forecasts.
//!
//! The ensemble output is `c . yhat` with the unbiasedness constraint
//! `sum(c) = 1`. The batch solution minimizes `c' R c` over that affine set,
//! where `R = sum_k V(k) V(k)'` and `V(k) = y(k) 1 - yhat(k)`. Two online
//! saddle-point iterations are provided: plain Arrow–Hurwicz with a fixed
//! primal step, and the variant with the per-step optimal primal rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::EPS_REG;

/// Above this condition estimate the batch solve falls back to a ridge.
pub const MAX_CONDITION: f64 = 1e12;
/// Ridge scale relative to `trace(R) / n`.
pub const RIDGE_SCALE: f64 = 1e-8;
pub const DEFAULT_ETA_LAMBDA: f64 = 0.1;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Accumulated error correlation matrix `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCorrelation {
    r: DMatrix<f64>,
    count: u64,
}

impl ErrorCorrelation {
    pub fn new(n: usize) -> Self {
        Self {
            r: DMatrix::zeros(n, n),
            count: 0,
        }
    }

    pub fn from_matrix(r: DMatrix<f64>) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::DimensionMismatch {
                expected: r.nrows(),
                got: r.ncols(),
            });
        }
        Ok(Self { r, count: 0 })
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `R += V V'` with `V = y 1 - forecasts`.
    pub fn accumulate(&mut self, y: f64, forecasts: &[f64]) -> Result<()> {
        check_dim(self.dim(), forecasts.len())?;
        let v = DVector::from_iterator(forecasts.len(), forecasts.iter().map(|f| y - f));
        self.r.ger(1.0, &v, &v, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Appends a zero row and column.
    pub fn grow(&mut self) {
        let n = self.dim();
        self.r = self.r.clone().resize(n + 1, n + 1, 0.0);
    }

    /// Drops the last row and column.
    pub fn shrink(&mut self) {
        let n = self.dim();
        if n > 0 {
            self.r = self.r.view((0, 0), (n - 1, n - 1)).into_owned();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub c: Vec<f64>,
    pub lambda: f64,
    pub saddle_value: f64,
    /// Ridge added to the diagonal; zero when `R` was solved as is.
    pub ridge: f64,
}

fn condition_estimate(r: &DMatrix<f64>) -> f64 {
    let eig = r.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the KKT system for the constrained minimizer:
///
/// ```text
/// c = R^-1 1 / (1' R^-1 1),  lambda = -2 / (1' R^-1 1),  L* = 1 / (1' R^-1 1)
/// ```
pub fn batch_solve(corr: &ErrorCorrelation) -> Result<BatchSolution> {
    let n = corr.dim();
    if n == 0 {
        return Err(Error::SingularCorrelation);
    }
    let r = corr.matrix();
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCorrelation);
    }
    let mut ridge = 0.0;
    let mut system = r.clone();
    if condition_estimate(r) > MAX_CONDITION {
        ridge = RIDGE_SCALE * r.trace() / n as f64;
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(Error::SingularCorrelation);
        }
        for i in 0..n {
            system[(i, i)] += ridge;
        }
    }
    let ones = DVector::from_element(n, 1.0);
    let z = system
        .cholesky()
        .ok_or(Error::SingularCorrelation)?
        .solve(&ones);
    let a = z.sum();
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::SingularCorrelation);
    }
    Ok(BatchSolution {
        c: z.iter().map(|v| v / a).collect(),
        lambda: -2.0 / a,
        saddle_value: 1.0 / a,
        ridge,
    })
}

/// Online ensemble weights with their Lagrange multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerState {
    c: Vec<f64>,
    lambda: f64,
    eta_lambda: f64,
}

impl CombinerState {
    /// Uniform weights `1/n`, `lambda = 0`.
    pub fn new(n: usize, eta_lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "combiner needs at least one input".into(),
            ));
        }
        Self::with_weights(vec![1.0 / n as f64; n], 0.0, eta_lambda)
    }

    pub fn with_weights(c: Vec<f64>, lambda: f64, eta_lambda: f64) -> Result<Self> {
        if !(eta_lambda > 0.0) || !eta_lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta_lambda must be positive, got {eta_lambda}"
            )));
        }
        Ok(Self {
            c,
            lambda,
            eta_lambda,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta_lambda(&self) -> f64 {
        self.eta_lambda
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn combine(&self, forecasts: &[f64]) -> Result<f64> {
        check_dim(self.dim(), forecasts.len())?;
        Ok(self.c.iter().zip(forecasts).map(|(c, f)| c * f).sum())
    }

    fn update_multiplier(&mut self) {
        self.lambda += self.eta_lambda * (self.c.iter().sum::<f64>() - 1.0);
    }

    /// `c += eta_c (2 v yhat - lambda 1)`, then
    /// `lambda += eta_lambda (sum(c) - 1)` with the new `c`.
    pub fn arrow_hurwicz_step(&mut self, forecasts: &[f64], y: f64, eta_c: f64) -> Result<()> {
        let v = y - self.combine(forecasts)?;
        let lambda = self.lambda;
        for (c, f) in self.c.iter_mut().zip(forecasts) {
            *c += eta_c * (2.0 * v * f - lambda);
        }
        self.update_multiplier();
        Ok(())
    }

    /// Arrow–Hurwicz with the primal rate that zeroes the a-posteriori
    /// error, `eta_c = v / (2 v |yhat|^2 - lambda sum(yhat))`.
    ///
    /// When the denominator is degenerate the primal step is skipped, the
    /// multiplier is still updated, and `DegenerateStep` is returned.
    pub fn optimal_step(&mut self, forecasts: &[f64], y: f64) -> Result<()> {
        let v = y - self.combine(forecasts)?;
        let lambda = self.lambda;
        let norm_sq: f64 = forecasts.iter().map(|f| f * f).sum();
        let total: f64 = forecasts.iter().sum();
        let denominator = 2.0 * v * norm_sq - lambda * total;
        if denominator.abs() <= EPS_REG || !denominator.is_finite() {
            self.update_multiplier();
            return Err(Error::DegenerateStep { denominator });
        }
        let scale = v / denominator;
        for (c, f) in self.c.iter_mut().zip(forecasts) {
            *c += scale * (2.0 * v * f - lambda);
        }
        self.update_multiplier();
        Ok(())
    }

    /// Replaces the weights with a batch solution.
    pub fn set_weights(&mut self, c: Vec<f64>) -> Result<()> {
        check_dim(self.dim(), c.len())?;
        self.c = c;
        Ok(())
    }

    /// Appends a zero weight so the combined output is unchanged.
    pub fn grow(&mut self) {
        self.c.push(0.0);
    }

    pub fn shrink(&mut self) {
        self.c.pop();
    }
}

pub fn accumulate(corr: &mut ErrorCorrelation, y: f64, forecasts: &[f64]) -> Result<()> {
    corr.accumulate(y, forecasts)
}

pub fn arrow_hurwicz_step(
    state: &mut CombinerState,
    forecasts: &[f64],
    y: f64,
    eta_c: f64,
) -> Result<()> {
    state.arrow_hurwicz_step(forecasts, y, eta_c)
}

pub fn optimal_step(state: &mut CombinerState, forecasts: &[f64], y: f64) -> Result<()> {
    state.optimal_step(forecasts, y)
}

pub fn combine(state: &CombinerState, forecasts: &[f64]) -> Result<f64> {
    state.combine(forecasts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Dense scan of `c1` on the line `c1 + c2 = 1`.
    fn grid_min(r: &DMatrix<f64>) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let steps = 500_000;
        for j in 0..=steps {
            let c1 = -2.0 + 5.0 * j as f64 / steps as f64;
            let c2 = 1.0 - c1;
            let q = r[(0, 0)] * c1 * c1 + 2.0 * r[(0, 1)] * c1 * c2 + r[(1, 1)] * c2 * c2;
            if q < best.0 {
                best = (q, c1);
            }
        }
        best
    }

    #[test]
    fn accumulate_examples() {
        let mut corr = ErrorCorrelation::new(2);
        corr.accumulate(1.0, &[1.0, 0.0]).unwrap();
        assert_eq!(
            corr.matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
        let before = corr.matrix().clone();
        corr.accumulate(3.0, &[3.0, 3.0]).unwrap();
        assert_eq!(corr.matrix(), &before);

        let mut a = ErrorCorrelation::new(2);
        a.accumulate(0.7, &[0.1, 1.3]).unwrap();
        let once = a.matrix().clone();
        a.accumulate(0.7, &[0.1, 1.3]).unwrap();
        assert_eq!(a.matrix(), &(once * 2.0));
        assert!(a.accumulate(1.0, &[1.0]).is_err());
    }

    #[test]
    fn batch_identity() {
        let corr = ErrorCorrelation::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let s = batch_solve(&corr).unwrap();
        assert_eq!(s.c, vec![0.5, 0.5]);
        assert_eq!(s.saddle_value, 0.5);
        assert_eq!(s.lambda, -1.0);
        assert_eq!(s.ridge, 0.0);
    }

    #[test]
    fn batch_diagonal() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let s = batch_solve(&ErrorCorrelation::from_matrix(r).unwrap()).unwrap();
        assert_abs_diff_eq!(s.c[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.c[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.saddle_value, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn batch_matches_grid_search() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let s = batch_solve(&ErrorCorrelation::from_matrix(r.clone()).unwrap()).unwrap();
        let (qmin, c1) = grid_min(&r);
        let c = DVector::from_vec(s.c.clone());
        let q = (c.transpose() * &r * &c)[(0, 0)];
        assert!(q <= qmin + 1e-12);
        assert!((q - qmin).abs() <= 1e-6);
        assert!((s.c[0] - c1).abs() <= 1e-4);
    }

    #[test]
    fn ridge_fallback_and_singular() {
        // Rank-one R: both forecasts have identical errors.
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = batch_solve(&ErrorCorrelation::from_matrix(r).unwrap()).unwrap();
        assert!(s.ridge > 0.0);
        assert_abs_diff_eq!(s.c.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(matches!(
            batch_solve(&ErrorCorrelation::new(2)),
            Err(Error::SingularCorrelation)
        ));
    }

    #[test]
    fn arrow_hurwicz_examples() {
        let mut s = CombinerState::with_weights(vec![0.5, 0.5], 0.0, 1.0).unwrap();
        s.arrow_hurwicz_step(&[1.0, 0.0], 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(s.weights()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lambda(), 0.1, epsilon = 1e-15);

        let mut s = CombinerState::with_weights(vec![0.3, 0.7], 0.4, 0.5).unwrap();
        let before = s.clone();
        s.arrow_hurwicz_step(&[2.0, -1.0], 5.0, 0.0).unwrap();
        assert_eq!(s, before);

        // v = 0, lambda = 0: only the multiplier moves.
        let mut s = CombinerState::with_weights(vec![0.5, 1.0], 0.0, 0.5).unwrap();
        s.arrow_hurwicz_step(&[2.0, 2.0], 3.0, 0.2).unwrap();
        assert_eq!(s.weights(), &[0.5, 1.0]);
        assert_abs_diff_eq!(s.lambda(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn optimal_step_examples() {
        let mut s = CombinerState::with_weights(vec![0.5, 0.5], 0.0, 0.3).unwrap();
        s.optimal_step(&[1.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(s.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.lambda(), 0.3 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn optimal_step_degenerate() {
        let mut s = CombinerState::with_weights(vec![0.6, 0.6], 0.0, 1.0).unwrap();
        let err = s.optimal_step(&[0.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateStep { .. }));
        assert_eq!(s.weights(), &[0.6, 0.6]);
        assert_abs_diff_eq!(s.lambda(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn combine_examples() {
        let s = CombinerState::with_weights(vec![0.0, 1.0, 0.0], 0.0, 0.1).unwrap();
        assert_eq!(s.combine(&[4.0, 8.0, 9.0]).unwrap(), 8.0);
        let s = CombinerState::new(4, 0.1).unwrap();
        assert_abs_diff_eq!(s.combine(&[2.5; 4]).unwrap(), 2.5, epsilon = 1e-15);
        let s = CombinerState::with_weights(vec![0.75, 0.25], 0.0, 0.1).unwrap();
        assert_eq!(s.combine(&[4.0, 8.0]).unwrap(), 5.0);
        assert!(s.combine(&[1.0]).is_err());
    }

    fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_iterator(n, n, entries.iter().cloned());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    proptest! {
        #[test]
        fn batch_solution_properties(n in 2usize..6, entries in proptest::collection::vec(-1.0f64..1.0, 25)) {
            let r = spd(n, &entries[..n * n]);
            let s = batch_solve(&ErrorCorrelation::from_matrix(r.clone()).unwrap()).unwrap();
            let c = DVector::from_vec(s.c.clone());
            prop_assert!((c.sum() - 1.0).abs() <= 1e-10);
            let q = (c.transpose() * &r * &c)[(0, 0)];
            prop_assert!((q - s.saddle_value).abs() <= 1e-10 * (1.0 + q.abs()));
            let kkt = &r * &c * 2.0 + DVector::from_element(n, s.lambda);
            prop_assert!(kkt.amax() <= 1e-10 * (1.0 + r.amax()));
            // Any feasible perturbation costs at least as much.
            for i in 0..n {
                for j in 0..n {
                    if i == j { continue; }
                    for t in [-0.5, -0.01, 0.01, 0.5] {
                        let mut d = c.clone();
                        d[i] += t;
                        d[j] -= t;
                        let qd = (d.transpose() * &r * &d)[(0, 0)];
                        prop_assert!(qd >= q - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn optimal_step_without_multiplier_is_kaczmarz(
            c in proptest::collection::vec(-1.0f64..1.0, 3),
            f in proptest::collection::vec(-2.0f64..2.0, 3),
            y in -3.0f64..3.0,
        ) {
            let norm_sq: f64 = f.iter().map(|v| v * v).sum();
            let v = y - c.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
            prop_assume!(norm_sq > 1e-3 && v.abs() > 1e-6);
            let mut s = CombinerState::with_weights(c.clone(), 0.0, 0.1).unwrap();
            s.optimal_step(&f, y).unwrap();
            for ((new, old), fi) in s.weights().iter().zip(&c).zip(&f) {
                let kaczmarz = old + v * fi / norm_sq;
                prop_assert!((new - kaczmarz).abs() <= 1e-12 * (1.0 + kaczmarz.abs()));
            }
            let post = y - s.combine(&f).unwrap();
            prop_assert!(post.abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }
}
