//! Fairness-aware re-ranking of explainable recommendations over knowledge graphs.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of the
//! pipeline:
//!
//! - [`graph`]: immutable typed triple store with bidirectional adjacency.
//! - [`path`] and [`distribution`]: user→item path enumeration, path patterns and
//!   per-user pattern distributions.
//! - [`embed`]: a small translational embedding trainer and the path / preference
//!   scores built on it.
//! - [`metrics`]: Simpson's index of diversity, Gini, NDCG@K, F1@K, active/inactive
//!   group split and the group / individual disparity measures.
//! - [`rerank`]: debiased path scoring, diversity scoring, the fairness-constrained
//!   0-1 selection (penalty local search plus an exhaustive oracle) and final ranking.
//! - [`dataset`] and [`synth`]: train/test datasets and a seeded generator for
//!   imbalanced marketplaces.
//! - [`candidates`]: top-N candidate construction from a dataset and an embedding.
//!
//! File formats, the CLI and parallel fan-out live in the `fairkg` companion crate.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod candidates;
pub mod dataset;
pub mod distribution;
pub mod embed;
mod error;
pub mod graph;
pub mod metrics;
pub mod path;
pub mod report;
pub mod rerank;
pub mod synth;

pub use error::{Error, Result};
