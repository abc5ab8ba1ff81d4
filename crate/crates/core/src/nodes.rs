//! Per-lag fuzzy nodes.
//!
//! Both node kinds are linear in their weights: the membership layers map the
//! lagged pair `(y(k-l), x(k-l))` to a regressor `phi`, and the node output is
//! `w . phi`. This is what lets the recursive estimators in
//! [`crate::learning`] tune them online.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::membership::{GaussianGrid, KnotGrid};

/// Regressor vector `phi` of a node.
pub type Regressor = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Neo-fuzzy neuron: two nonlinear synapses (one per input), each a weighted
/// sum of B-spline memberships. Weights are ordered `(w_y..., w_x...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeoFuzzyNode {
    grid_y: KnotGrid,
    grid_x: KnotGrid,
    weights: Vec<f64>,
}

impl NeoFuzzyNode {
    /// Node with all weights zero.
    pub fn new(grid_y: KnotGrid, grid_x: KnotGrid) -> Self {
        let weights = vec![0.0; grid_y.len() + grid_x.len()];
        Self {
            grid_y,
            grid_x,
            weights,
        }
    }

    pub fn with_weights(grid_y: KnotGrid, grid_x: KnotGrid, weights: Vec<f64>) -> Result<Self> {
        let expected = grid_y.len() + grid_x.len();
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        Ok(Self {
            grid_y,
            grid_x,
            weights,
        })
    }

    pub fn grid_y(&self) -> &KnotGrid {
        &self.grid_y
    }

    pub fn grid_x(&self) -> &KnotGrid {
        &self.grid_x
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn regressor_into(&self, y_lag: f64, x_lag: f64, out: &mut [f64]) {
        let (phi_y, phi_x) = out.split_at_mut(self.grid_y.len());
        self.grid_y.eval_into(y_lag, phi_y);
        self.grid_x.eval_into(x_lag, phi_x);
    }

    pub fn regressor(&self, y_lag: f64, x_lag: f64) -> Regressor {
        let mut out = vec![0.0; self.dim()];
        self.regressor_into(y_lag, x_lag, &mut out);
        out
    }

    pub fn forward(&self, y_lag: f64, x_lag: f64) -> f64 {
        dot(&self.weights, &self.regressor(y_lag, x_lag))
    }
}

/// Two-input Wang–Mendel system with `h` rules; rule `i` pairs the `i`-th
/// Gaussian of each input. The output is the normalized, weighted rule
/// activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WangMendelNode {
    grid_y: GaussianGrid,
    grid_x: GaussianGrid,
    weights: Vec<f64>,
}

impl WangMendelNode {
    pub fn new(grid_y: GaussianGrid, grid_x: GaussianGrid) -> Result<Self> {
        let h = grid_y.len();
        Self::with_weights(grid_y, grid_x, vec![0.0; h])
    }

    pub fn with_weights(
        grid_y: GaussianGrid,
        grid_x: GaussianGrid,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let h = grid_y.len();
        if grid_x.len() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                got: grid_x.len(),
            });
        }
        if weights.len() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                got: weights.len(),
            });
        }
        Ok(Self {
            grid_y,
            grid_x,
            weights,
        })
    }

    pub fn grid_y(&self) -> &GaussianGrid {
        &self.grid_y
    }

    pub fn grid_x(&self) -> &GaussianGrid {
        &self.grid_x
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn regressor_into(&self, y_lag: f64, x_lag: f64, out: &mut [f64]) -> Result<()> {
        let mut mu_x = vec![0.0; self.dim()];
        self.grid_y.eval_into(y_lag, out);
        self.grid_x.eval_into(x_lag, &mut mu_x);
        let mut total = 0.0;
        for (o, m) in out.iter_mut().zip(&mu_x) {
            *o *= m;
            total += *o;
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateActivation);
        }
        out.iter_mut().for_each(|o| *o /= total);
        Ok(())
    }

    pub fn regressor(&self, y_lag: f64, x_lag: f64) -> Result<Regressor> {
        let mut out = vec![0.0; self.dim()];
        self.regressor_into(y_lag, x_lag, &mut out)?;
        Ok(out)
    }

    pub fn forward(&self, y_lag: f64, x_lag: f64) -> Result<f64> {
        Ok(dot(&self.weights, &self.regressor(y_lag, x_lag)?))
    }
}

/// A node of either kind. Models are homogeneous, but the enum lets the
/// assembly code treat both uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    NeoFuzzy(NeoFuzzyNode),
    WangMendel(WangMendelNode),
}

impl Node {
    pub fn dim(&self) -> usize {
        match self {
            Node::NeoFuzzy(n) => n.dim(),
            Node::WangMendel(n) => n.dim(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Node::NeoFuzzy(n) => &n.weights,
            Node::WangMendel(n) => &n.weights,
        }
    }

    pub fn set_weights(&mut self, w: &[f64]) {
        let target = match self {
            Node::NeoFuzzy(n) => &mut n.weights,
            Node::WangMendel(n) => &mut n.weights,
        };
        assert_eq!(target.len(), w.len(), "weight length must not change");
        target.copy_from_slice(w);
    }

    pub fn regressor_into(&self, y_lag: f64, x_lag: f64, out: &mut [f64]) -> Result<()> {
        match self {
            Node::NeoFuzzy(n) => {
                n.regressor_into(y_lag, x_lag, out);
                Ok(())
            }
            Node::WangMendel(n) => n.regressor_into(y_lag, x_lag, out),
        }
    }

    pub fn regressor(&self, y_lag: f64, x_lag: f64) -> Result<Regressor> {
        let mut out = vec![0.0; self.dim()];
        self.regressor_into(y_lag, x_lag, &mut out)?;
        Ok(out)
    }

    pub fn forward(&self, y_lag: f64, x_lag: f64) -> Result<f64> {
        Ok(dot(self.weights(), &self.regressor(y_lag, x_lag)?))
    }

    /// Same grids, weights reset to zero.
    pub fn zeroed(&self) -> Node {
        let mut n = self.clone();
        let zeros = vec![0.0; n.dim()];
        n.set_weights(&zeros);
        n
    }
}

pub fn neo_regressor(node: &NeoFuzzyNode, y_lag: f64, x_lag: f64) -> Regressor {
    node.regressor(y_lag, x_lag)
}

pub fn neo_forward(node: &NeoFuzzyNode, y_lag: f64, x_lag: f64) -> f64 {
    node.forward(y_lag, x_lag)
}

pub fn wm_regressor(node: &WangMendelNode, y_lag: f64, x_lag: f64) -> Result<Regressor> {
    node.regressor(y_lag, x_lag)
}

pub fn wm_forward(node: &WangMendelNode, y_lag: f64, x_lag: f64) -> Result<f64> {
    node.forward(y_lag, x_lag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tri(h: usize) -> KnotGrid {
        KnotGrid::uniform(0.0, 1.0, h, 2).unwrap()
    }

    #[test]
    fn neo_regressor_at_peaks() {
        let node = NeoFuzzyNode::new(tri(3), tri(3));
        let phi = node.regressor(0.5, 1.0);
        assert_eq!(phi, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let phi = node.regressor(0.25, 1.0);
        for (a, b) in phi.iter().zip([0.5, 0.5, 0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn neo_forward_examples() {
        let g = tri(5);
        let zero = NeoFuzzyNode::new(g.clone(), g.clone());
        assert_eq!(zero.forward(0.3, 0.9), 0.0);

        // Weights equal to the y-peaks reproduce the identity on the y input.
        let mut w = g.peaks();
        w.extend(vec![0.0; 5]);
        let ident = NeoFuzzyNode::with_weights(g.clone(), g.clone(), w).unwrap();
        for u in [0.0, 0.1, 0.33, 0.5, 0.77, 1.0] {
            assert_abs_diff_eq!(ident.forward(u, 0.42), u, epsilon = 1e-14);
        }

        let mut w = vec![0.3; 5];
        w.extend(vec![-1.2; 5]);
        let consts = NeoFuzzyNode::with_weights(g.clone(), g, w).unwrap();
        assert_abs_diff_eq!(consts.forward(0.61, 0.07), 0.3 - 1.2, epsilon = 1e-14);
    }

    #[test]
    fn wm_examples() {
        let one = GaussianGrid::uniform(0.0, 1.0, 1).unwrap();
        let node = WangMendelNode::new(one.clone(), one).unwrap();
        assert_eq!(node.regressor(0.1, 0.8).unwrap(), vec![1.0]);

        let g = GaussianGrid::uniform(0.0, 1.0, 3).unwrap();
        let node = WangMendelNode::new(g.clone(), g).unwrap();
        let phi = node.regressor(0.5, 0.5).unwrap();
        assert!(phi[1] > phi[0] && phi[1] > phi[2]);

        let g = GaussianGrid::new(vec![0.0, 1.0], vec![0.4, 0.4]).unwrap();
        let node = WangMendelNode::with_weights(g.clone(), g, vec![0.0, 1.0]).unwrap();
        let phi = node.regressor(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(phi[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(node.forward(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn wm_constant_weights() {
        let g = GaussianGrid::uniform(0.0, 1.0, 4).unwrap();
        let node = WangMendelNode::with_weights(g.clone(), g.clone(), vec![0.7; 4]).unwrap();
        assert_abs_diff_eq!(node.forward(0.13, 0.91).unwrap(), 0.7, epsilon = 1e-14);
        let zero = WangMendelNode::new(g.clone(), g).unwrap();
        assert_eq!(zero.forward(0.13, 0.91).unwrap(), 0.0);
    }

    #[test]
    fn wm_underflow_is_reported() {
        let g = GaussianGrid::new(vec![0.0, 0.1], vec![0.01, 0.01]).unwrap();
        let node = WangMendelNode::new(g.clone(), g).unwrap();
        assert!(matches!(
            node.regressor(1e3, -1e3),
            Err(Error::DegenerateActivation)
        ));
    }

    #[test]
    fn wm_rejects_mismatched_grids() {
        let a = GaussianGrid::uniform(0.0, 1.0, 3).unwrap();
        let b = GaussianGrid::uniform(0.0, 1.0, 4).unwrap();
        assert!(WangMendelNode::new(a, b).is_err());
    }

    #[test]
    fn neo_forward_is_continuous() {
        let g = KnotGrid::uniform(0.0, 1.0, 6, 2).unwrap();
        let w: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let node = NeoFuzzyNode::with_weights(g.clone(), g, w.clone()).unwrap();
        let range =
            w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
        let spacing = 1.0 / 5.0;
        let lipschitz = 2.0 * range / spacing;
        let du = 1e-4;
        for j in 0..10_000 {
            let u = j as f64 / 10_000.0;
            let diff = (node.forward(u + du, u + du) - node.forward(u, u)).abs();
            assert!(diff <= lipschitz * du * 1.0000001, "u={u} diff={diff}");
        }
    }

    proptest! {
        #[test]
        fn linear_in_parameters(w in proptest::collection::vec(-5.0f64..5.0, 8),
                                y in -0.5f64..1.5, x in -0.5f64..1.5) {
            let neo = NeoFuzzyNode::with_weights(tri(4), tri(4), w.clone()).unwrap();
            let phi = neo.regressor(y, x);
            let direct: f64 = w.iter().zip(&phi).map(|(a, b)| a * b).sum();
            prop_assert!((neo.forward(y, x) - direct).abs() <= 1e-12);

            let g = GaussianGrid::uniform(0.0, 1.0, 8).unwrap();
            let wm = WangMendelNode::with_weights(g.clone(), g, w.clone()).unwrap();
            let phi = wm.regressor(y, x).unwrap();
            let direct: f64 = w.iter().zip(&phi).map(|(a, b)| a * b).sum();
            prop_assert!((wm.forward(y, x).unwrap() - direct).abs() <= 1e-12);
        }

        #[test]
        fn regressor_sums(y in 0.0f64..=1.0, x in 0.0f64..=1.0, h in 2usize..10) {
            let neo = NeoFuzzyNode::new(tri(h), tri(h));
            prop_assert!((neo.regressor(y, x).iter().sum::<f64>() - 2.0).abs() <= 1e-12);

            let g = GaussianGrid::uniform(0.0, 1.0, h).unwrap();
            let wm = WangMendelNode::new(g.clone(), g).unwrap();
            let phi = wm.regressor(y, x).unwrap();
            prop_assert!(phi.iter().all(|&p| p >= 0.0));
            prop_assert!((phi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wm_output_within_weight_range(w in proptest::collection::vec(-3.0f64..3.0, 5),
                                         y in -1.0f64..2.0, x in -1.0f64..2.0) {
            let g = GaussianGrid::uniform(0.0, 1.0, 5).unwrap();
            let wm = WangMendelNode::with_weights(g.clone(), g, w.clone()).unwrap();
            let out = wm.forward(y, x).unwrap();
            let lo = w.iter().cloned().fold(f64::MAX, f64::min);
            let hi = w.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert!(out >= lo - 1e-12 && out <= hi + 1e-12);
        }

        #[test]
        fn neo_output_bounded_by_active_weights(w in proptest::collection::vec(-3.0f64..3.0, 10),
                                                y in 0.0f64..=1.0, x in 0.0f64..=1.0) {
            let neo = NeoFuzzyNode::with_weights(tri(5), tri(5), w.clone()).unwrap();
            let phi = neo.regressor(y, x);
            let bound: f64 = w.iter().zip(&phi).filter(|(_, &p)| p != 0.0).map(|(a, _)| a.abs()).sum();
            prop_assert!(neo.forward(y, x).abs() <= bound + 1e-12);
        }
    }
}
