//! Volatility homogenisation and entropy-rate estimation for price series.
//!
//! The crate is organised along the data flow of a study:
//!
//! - [`ingest`] loads daily/tick price files, filters eligible instruments,
//!   computes log returns and generates synthetic paths.
//! - [`homogenise`] extracts the spatial skeleton of a path: the times at
//!   which it moves a fixed distance `delta` and the resulting up/down sequence.
//! - [`quantise`] turns real-valued returns into equal-count symbol sequences.
//! - [`ctw`] computes Context Tree Weighting mixture probabilities and the
//!   entropy rate in bits per symbol.
//! - [`stats`] aggregates entropy rates into kernel densities, correlation
//!   matrices and per-delta summaries.
//! - [`pipeline`] ties everything together behind a JSON configuration.
//!
//! Batch work fans out through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. Both paths produce
//! identical results.

pub mod ctw;
pub mod homogenise;
pub mod ingest;
pub mod par;
pub mod pipeline;
pub mod quantise;
pub mod stats;

pub use ctw::{entropy_rate, EntropyEstimate};
pub use homogenise::{decompose, CrossingMode, SkeletonSeries};
pub use ingest::{FrequencyKind, PriceSeries, ReturnSeries};
pub use quantise::{quantile_bins, SymbolSequence};
