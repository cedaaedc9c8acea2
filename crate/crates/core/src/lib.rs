//! Order-book reconstruction, Liquidity Withdrawal Index (LWI) features and
//! short-horizon forecasting of liquidity withdrawal.
//!
//! The pipeline runs in stages, one module each:
//!
//! - [`mbo`]: market-by-order event parsing (CSV and `MBO1` binary) and a
//!   seeded synthetic stream generator.
//! - [`book`]: the per-symbol limit-order-book state machine producing
//!   top-of-book snapshots and per-event flow deltas.
//! - [`grid`]: resampling of irregular event time onto a uniform grid.
//! - [`features`]: the LWI target, microstructure features and horizon
//!   targets, assembled into a [`features::FeatureFrame`].
//! - [`stats`]: ADF, ACF/PACF, mutual information, LASSO paths and the
//!   cross-symbol feature-screening consensus.
//! - [`models`]: OLS, AR/HAR designs and gradient-boosted regression trees.
//! - [`eval`]: embargoed expanding-window walk-forward evaluation.
//! - [`scenario`]: bin-level generators with planted structure, used by
//!   experiments and tests.

pub mod book;
pub mod error;
pub mod eval;
pub mod features;
pub mod grid;
pub mod mbo;
pub mod models;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
