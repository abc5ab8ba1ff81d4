//! Membership-function grids for a single scalar input.
//!
//! Two layouts are provided. [`KnotGrid`] holds a clamped, uniformly spaced
//! B-spline knot vector whose basis functions form a partition of unity over
//! `[lo, hi]`; with order 2 they are the classic triangular memberships of a
//! neo-fuzzy synapse. [`GaussianGrid`] holds bell-shaped memberships with
//! infinite support for the Wang–Mendel node.
//!
//! Grids are immutable once built and evaluation is a pure function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membership degrees of one input, one entry per membership function.
pub type DegreeVector = Vec<f64>;

/// Clamped uniform B-spline knot vector producing exactly `h` basis
/// functions of order `q` on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    lo: f64,
    hi: f64,
    h: usize,
    q: usize,
    knots: Vec<f64>,
}

impl KnotGrid {
    /// Lays `h - q + 2` distinct knots uniformly over `[lo, hi]` and repeats
    /// each boundary knot `q` times, for a knot vector of length `h + q`.
    pub fn uniform(lo: f64, hi: f64, h: usize, q: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        if q < 1 || q > h {
            return Err(Error::InvalidOrder { h, q });
        }
        let intervals = h - q + 1;
        let step = (hi - lo) / intervals as f64;
        let mut knots = Vec::with_capacity(h + q);
        knots.extend(std::iter::repeat_n(lo, q - 1));
        for j in 0..=intervals {
            let t = if j == intervals {
                hi
            } else {
                lo + step * j as f64
            };
            knots.push(t);
        }
        knots.extend(std::iter::repeat_n(hi, q - 1));
        debug_assert_eq!(knots.len(), h + q);
        Ok(Self {
            lo,
            hi,
            h,
            q,
            knots,
        })
    }

    /// Builds a grid from an explicit knot vector, checking every invariant.
    pub fn from_knots(knots: Vec<f64>, q: usize) -> Result<Self> {
        if q < 1 || knots.len() < 2 * q {
            return Err(Error::InvalidOrder {
                h: knots.len().saturating_sub(q),
                q,
            });
        }
        let h = knots.len() - q;
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        if !(lo < hi) {
            return Err(Error::InvalidRange { lo, hi });
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidGrid("knots must be nondecreasing".into()));
        }
        if knots[..q].iter().any(|&t| t != lo) || knots[h..].iter().any(|&t| t != hi) {
            return Err(Error::InvalidGrid(format!(
                "boundary knots must be repeated {q} times"
            )));
        }
        if knots[q - 1..=h].windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(
                "interior knots must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            lo,
            hi,
            h,
            q,
            knots,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.h
    }

    pub fn is_empty(&self) -> bool {
        self.h == 0
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// The distinct knots `lo = t_0 < ... < t_m = hi`.
    pub fn distinct_knots(&self) -> &[f64] {
        &self.knots[self.q - 1..=self.h]
    }

    /// Abscissae where each basis function peaks (Greville points). For
    /// `q = 2` these are the triangle apexes.
    pub fn peaks(&self) -> Vec<f64> {
        if self.q == 1 {
            return self.knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        }
        (0..self.h)
            .map(|i| self.knots[i + 1..i + self.q].iter().sum::<f64>() / (self.q - 1) as f64)
            .collect()
    }

    /// Index `s` of the knot span containing `u`, with `q - 1 <= s <= h - 1`.
    fn span(&self, u: f64) -> usize {
        let last = self.h - 1;
        if u >= self.hi {
            return last;
        }
        // knots[q-1..=h] is strictly increasing.
        let interior = &self.knots[self.q - 1..=self.h];
        let pos = interior.partition_point(|&t| t <= u);
        (pos.saturating_sub(1) + self.q - 1).min(last)
    }

    /// Writes the `h` basis values at `u` into `out`. Inputs outside
    /// `[lo, hi]` are clamped first.
    pub fn eval_into(&self, u: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.h, "output slice has wrong length");
        out.iter_mut().for_each(|v| *v = 0.0);
        let u = if u.is_nan() {
            self.lo
        } else {
            u.clamp(self.lo, self.hi)
        };
        let s = self.span(u);
        let degree = self.q - 1;

        // Triangular table of the q nonzero basis functions on span s.
        let mut basis = vec![0.0; self.q];
        let mut left = vec![0.0; self.q];
        let mut right = vec![0.0; self.q];
        basis[0] = 1.0;
        for j in 1..=degree {
            left[j] = u - self.knots[s + 1 - j];
            right[j] = self.knots[s + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { basis[r] / denom } else { 0.0 };
                basis[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            basis[j] = saved;
        }
        let first = s - degree;
        out[first..=s].copy_from_slice(&basis);
    }

    pub fn eval(&self, u: f64) -> DegreeVector {
        let mut out = vec![0.0; self.h];
        self.eval_into(u, &mut out);
        out
    }
}

/// Gaussian memberships `exp(-(u - c_i)^2 / (2 sigma_i^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGrid {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl GaussianGrid {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidGrid("at least one center required".into()));
        }
        if centers.len() != widths.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: widths.len(),
            });
        }
        if widths.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid("widths must be positive".into()));
        }
        if centers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(
                "centers must be strictly increasing".into(),
            ));
        }
        Ok(Self { centers, widths })
    }

    /// `h` centers spread uniformly over `[lo, hi]` (endpoints included),
    /// each with width equal to the center spacing.
    pub fn uniform(lo: f64, hi: f64, h: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        if h == 0 {
            return Err(Error::InvalidOrder { h, q: 1 });
        }
        if h == 1 {
            return Self::new(vec![0.5 * (lo + hi)], vec![hi - lo]);
        }
        let spacing = (hi - lo) / (h - 1) as f64;
        let centers = (0..h)
            .map(|i| {
                if i == h - 1 {
                    hi
                } else {
                    lo + spacing * i as f64
                }
            })
            .collect();
        Self::new(centers, vec![spacing; h])
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn eval_into(&self, u: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "output slice has wrong length");
        for ((o, &c), &s) in out.iter_mut().zip(&self.centers).zip(&self.widths) {
            let d = u - c;
            *o = (-(d * d) / (2.0 * s * s)).exp();
        }
    }

    pub fn eval(&self, u: f64) -> DegreeVector {
        let mut out = vec![0.0; self.len()];
        self.eval_into(u, &mut out);
        out
    }
}

/// Convenience wrapper matching [`KnotGrid::uniform`].
pub fn build_uniform_grid(lo: f64, hi: f64, h: usize, q: usize) -> Result<KnotGrid> {
    KnotGrid::uniform(lo, hi, h, q)
}

pub fn eval_bspline(grid: &KnotGrid, u: f64) -> DegreeVector {
    grid.eval(u)
}

pub fn eval_gaussian(grid: &GaussianGrid, u: f64) -> DegreeVector {
    grid.eval(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Textbook recursive Cox–de Boor with the closed right end, used as an
    /// oracle for the table-based evaluator.
    fn cox_de_boor(knots: &[f64], i: usize, q: usize, u: f64, hi: f64) -> f64 {
        if q == 1 {
            let inside = knots[i] <= u && u < knots[i + 1];
            let right_end = u == hi && knots[i] < knots[i + 1] && knots[i + 1] == hi;
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + q - 1] - knots[i];
        if d1 > 0.0 {
            v += (u - knots[i]) / d1 * cox_de_boor(knots, i, q - 1, u, hi);
        }
        let d2 = knots[i + q] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + q] - u) / d2 * cox_de_boor(knots, i + 1, q - 1, u, hi);
        }
        v
    }

    fn hat(peaks: &[f64], i: usize, u: f64) -> f64 {
        let c = peaks[i];
        if u < c {
            if i == 0 {
                return 0.0;
            }
            ((u - peaks[i - 1]) / (c - peaks[i - 1])).max(0.0)
        } else if u > c {
            if i + 1 == peaks.len() {
                return 0.0;
            }
            ((peaks[i + 1] - u) / (peaks[i + 1] - c)).max(0.0)
        } else {
            1.0
        }
    }

    #[test]
    fn piecewise_constant_grid() {
        let g = KnotGrid::uniform(0.0, 1.0, 3, 1).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in g.distinct_knots().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(g.eval(0.5), vec![0.0, 1.0, 0.0]);
        assert_eq!(g.eval(1.0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn triangular_peaks() {
        let g = KnotGrid::uniform(0.0, 1.0, 5, 2).unwrap();
        assert_eq!(g.peaks(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = KnotGrid::uniform(-1.0, 1.0, 4, 2).unwrap();
        for (a, b) in g.peaks().iter().zip([-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn order_one_bins() {
        // Two bins over distinct knots {0, 0.5, 1}.
        let g = KnotGrid::uniform(0.0, 1.0, 2, 1).unwrap();
        assert_eq!(g.distinct_knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.eval(0.25), vec![1.0, 0.0]);
    }

    #[test]
    fn order_two_values() {
        let g = KnotGrid::uniform(0.0, 1.0, 3, 2).unwrap();
        assert_eq!(g.peaks(), vec![0.0, 0.5, 1.0]);
        assert_eq!(g.eval(0.5), vec![0.0, 1.0, 0.0]);
        let v = g.eval(0.25);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn out_of_range_is_clamped() {
        let g = KnotGrid::uniform(0.0, 1.0, 4, 3).unwrap();
        assert_eq!(g.eval(-3.0), g.eval(0.0));
        assert_eq!(g.eval(7.0), g.eval(1.0));
        assert_abs_diff_eq!(g.eval(7.0).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            KnotGrid::uniform(1.0, 1.0, 3, 2),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            KnotGrid::uniform(0.0, 1.0, 2, 3),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(matches!(
            KnotGrid::uniform(0.0, 1.0, 2, 0),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(KnotGrid::from_knots(vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0], 2).is_err());
        assert!(KnotGrid::from_knots(vec![0.0, 0.0, 0.3, 1.0, 1.0], 2).is_ok());
    }

    #[test]
    fn dense_sweep_unity_partition() {
        for q in 1..=4 {
            for h in q..=9 {
                let g = KnotGrid::uniform(-2.0, 3.0, h, q).unwrap();
                for j in 0..=5000 {
                    let u = -2.0 + 5.0 * j as f64 / 5000.0;
                    let s: f64 = g.eval(u).iter().sum();
                    assert!((s - 1.0).abs() <= 1e-12, "h={h} q={q} u={u} sum={s}");
                }
            }
        }
    }

    #[test]
    fn gaussian_values() {
        let g = GaussianGrid::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(g.eval(1.0)[1], 1.0);
        assert_abs_diff_eq!(g.eval(0.5)[0], (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!((-0.5f64).exp(), 0.606531, epsilon = 1e-6);
        let v = g.eval(0.5);
        assert_abs_diff_eq!(v[0], v[1], epsilon = 1e-15);
    }

    #[test]
    fn gaussian_default_widths() {
        let g = GaussianGrid::uniform(0.0, 1.0, 5).unwrap();
        assert_eq!(g.centers(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.widths().iter().all(|&s| s == 0.25));
        assert!(GaussianGrid::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianGrid::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_recursive_oracle(q in 1usize..5, extra in 0usize..6, u in -0.5f64..1.5) {
            let h = q + extra;
            let g = KnotGrid::uniform(0.0, 1.0, h, q).unwrap();
            let uc = u.clamp(0.0, 1.0);
            let v = g.eval(u);
            for (i, &vi) in v.iter().enumerate() {
                let o = cox_de_boor(g.knots(), i, q, uc, 1.0);
                prop_assert!((vi - o).abs() <= 1e-12, "i={} table={} oracle={}", i, vi, o);
            }
        }

        #[test]
        fn unity_locality_bounds(q in 1usize..6, extra in 0usize..8, lo in -5.0f64..5.0,
                                 width in 0.1f64..10.0, t in 0.0f64..1.0) {
            let h = q + extra;
            let g = KnotGrid::uniform(lo, lo + width, h, q).unwrap();
            let v = g.eval(lo + t * width);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(v.iter().filter(|&&d| d != 0.0).count() <= q);
            prop_assert!(v.iter().all(|&d| (0.0..=1.0).contains(&d)));
        }

        #[test]
        fn order_two_is_hat(extra in 0usize..10, u in -1.0f64..2.0) {
            let h = 2 + extra;
            let g = KnotGrid::uniform(0.0, 1.0, h, 2).unwrap();
            let peaks: Vec<f64> = (0..h).map(|i| i as f64 / (h - 1) as f64).collect();
            let uc = u.clamp(0.0, 1.0);
            for (i, &vi) in g.eval(u).iter().enumerate() {
                prop_assert!((vi - hat(&peaks, i, uc)).abs() <= 1e-12);
            }
        }

        #[test]
        fn gaussian_positive_bounded(h in 1usize..10, u in -3.0f64..3.0) {
            let g = GaussianGrid::uniform(-1.0, 1.0, h).unwrap();
            prop_assert!(g.eval(u).iter().all(|&d| d > 0.0 && d <= 1.0));
        }
    }
}
