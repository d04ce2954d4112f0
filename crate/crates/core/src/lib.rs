//! Pruned multi-layer perceptrons trained with a two-stage Levenberg-Marquardt
//! procedure, for autoregressive forecasting of hourly series.
//!
//! * [`net`]: masked single-hidden-layer perceptron, residuals and Jacobian.
//! * [`optim`]: Levenberg-Marquardt solver.
//! * [`prune`]: stage-1 ensemble, bootstrap significance mask, two-stage pipeline.
//! * [`series`]: CSV ingestion, lag embedding, splitting, synthetic series.
//! * [`metrics`]: nRMSE / nMAE, box statistics, Jarque-Bera.
//! * [`bench`]: MLP vs pruned-MLP campaigns, report tables, model files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod par;
pub mod prune;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
pub use net::{ConnectionMask, Network, ParameterVector, Topology};
pub use series::{Dataset, Series};
