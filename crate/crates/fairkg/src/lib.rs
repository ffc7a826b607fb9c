//! File formats, pipeline orchestration and the `fairkg` command line on top of
//! [`fairkg_core`].
//!
//! - [`io`]: triple, test-purchase and embedding files; staged output writing.
//! - [`candidate_file`]: versioned JSON-lines candidate sets.
//! - [`config`]: the resolved run configuration and its `key=value` file form.
//! - [`pipeline`]: the stages (`generate`, `train`, `paths`, `rerank`, `evaluate`,
//!   `sweep`, `report`), with per-user work spread over a worker pool.
//! - [`output`]: report records, CSV and table renderings.

#![forbid(unsafe_code)]

pub mod candidate_file;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{FairkgError, Result};
