//! Day-ahead electricity price forecasting with transfer learning across
//! markets.
//!
//! The crate covers the whole pipeline: hourly series ingestion and DST
//! repair ([`timeseries`]), the median/MAD + asinh transform ([`transform`]),
//! sample construction ([`features`]), a from-scratch dense network with
//! Adam, early stopping and output-layer fine-tuning ([`neural`]), naive and
//! LEAR benchmarks ([`linear`]), metrics and Diebold-Mariano tests
//! ([`evaluation`]) and the experiment runners ([`experiments`]).

pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod features;
pub mod linear;
pub mod neural;
pub mod timeseries;
pub mod transform;

pub use error::{Error, Result};
