#![allow(dead_code)]

use std::path::PathBuf;

use anarx_core::membership::KnotGrid;
use anarx_core::nodes::NeoFuzzyNode;
use anarx_core::pipeline::{RunConfig, SeriesFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Synthetic 15-minute load profile: morning and evening peaks, weekend
/// dip, slow seasonal swing, AR(1) drift and white noise.
pub fn synthetic_load(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift_noise = Normal::new(0.0, 0.004).unwrap();
    let white = Normal::new(0.0, 0.015).unwrap();
    let mut drift = 0.0;
    (0..len)
        .map(|k| {
            let day = k / 96;
            let tod = (k % 96) as f64 / 96.0;
            let bump = |c: f64, w: f64| (-(tod - c).powi(2) / (2.0 * w * w)).exp();
            let daily = 0.35 + 0.3 * bump(0.375, 0.06) + 0.4 * bump(0.79, 0.05);
            let weekend = if day % 7 >= 5 { 0.82 } else { 1.0 };
            let season = 1.0 + 0.08 * (2.0 * std::f64::consts::PI * day as f64 / 365.0).sin();
            drift = 0.998 * drift + drift_noise.sample(&mut rng);
            800.0 * (daily * weekend * season + drift + white.sample(&mut rng))
        })
        .collect()
}

pub fn frame(values: Vec<f64>) -> SeriesFrame {
    SeriesFrame::new("synthetic", values).unwrap()
}

/// A realization of a two-node neo-fuzzy NARX model with known weights,
/// driven by a uniform exogenous input on `[0, 1]`.
pub struct Planted {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub nodes: Vec<NeoFuzzyNode>,
}

pub fn planted(len: usize, h: usize, q: usize, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = KnotGrid::uniform(0.0, 1.0, h, q).unwrap();
    let nodes: Vec<NeoFuzzyNode> = (0..2)
        .map(|_| {
            let w = (0..2 * h).map(|_| rng.random_range(0.0..0.25)).collect();
            NeoFuzzyNode::with_weights(grid.clone(), grid.clone(), w).unwrap()
        })
        .collect();
    let x: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut y = vec![0.5, 0.5];
    for k in 2..len {
        let v = nodes[0].forward(y[k - 1], x[k - 1]) + nodes[1].forward(y[k - 2], x[k - 2]);
        y.push(v);
    }
    Planted { y, x, nodes }
}

pub fn config(text: &str) -> RunConfig {
    RunConfig::from_toml_str(text).unwrap()
}

pub fn rmse(errors: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = errors.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (s / n as f64).sqrt()
}
