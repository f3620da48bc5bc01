//! Bayesian exponential smoothing for univariate series.
//!
//! Two models are provided: a local-and-global-trend model ([`model::lgt`])
//! for positive series and a damped-local-trend model ([`model::dlt`]) with
//! a deterministic global trend and exogenous regressors. Parameters are
//! estimated in-crate by MAP optimization or random-walk Metropolis
//! ([`inference`]); [`estimator`] ties models and inference together and
//! [`backtest`] scores forecasts on expanding-window splits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod distributions;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod model;
pub mod series;

pub use error::{Error, Result};
