//! Evolving additive NARX forecasters built from neo-fuzzy (or Wang–Mendel)
//! nodes, with an optional convexity-constrained ensemble head.
//!
//! Layers, bottom-up: [`membership`] grids, [`nodes`], online [`learning`]
//! rules, the [`anarx`] model, the [`combiner`], the streaming
//! [`forecaster`], and the [`pipeline`] and [`cli`] around them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anarx;
pub mod cli;
pub mod combiner;
pub mod error;
pub mod forecaster;
pub mod learning;
pub mod membership;
pub mod nodes;
pub mod pipeline;

pub use error::{Error, Result};
