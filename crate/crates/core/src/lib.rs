//! Consistency analysis for retrained classifiers.
//!
//! When a deployed classifier is periodically retrained on a growing data
//! stream, successive generations can disagree on inputs they previously got
//! right. This crate measures that churn (consistency, correct consistency,
//! top-k relaxations, correctness transitions), verifies the geometric bounds
//! that explain why ensemble averaging reduces it, and implements a dynamic
//! snapshot ensemble trainer with validation-accuracy pruning, exercised
//! end-to-end on a built-in feed-forward classifier over simulated streams.
//!
//! Module map:
//! - [`simplex`] — distances, centroids, and correctness similarity on the
//!   probability simplex;
//! - [`metrics`] — agreement metrics between prediction matrices;
//! - [`bounds`] — Monte Carlo verification of the ensemble inequalities and
//!   the improvement-probability lower bound;
//! - [`net`] — a minimal MLP classifier with SGD, dropout, and snapshots;
//! - [`schedule`] — learning-rate schedules and snapshot selection;
//! - [`ensemble`] — the dynamic snapshot ensemble algorithm, combiners, and
//!   baseline trainers;
//! - [`data`] — synthetic datasets, nested imbalanced streams, CSV I/O;
//! - [`experiment`] — the experiment harness, its config format, and report
//!   emission.

pub mod bounds;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod schedule;
pub mod simplex;

pub use error::{Error, Result};
