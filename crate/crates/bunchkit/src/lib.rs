//! Estimation toolkit for kink bunching designs on paycheck panel data.
//!
//! The pipeline goes from raw paycheck records to sharp bounds on the average
//! treatment effect among units bunched at a kink in the pay schedule (the
//! overtime threshold being the motivating case), with corrections for
//! counterfactual bunching, policy counterfactuals built from bi-log-concave
//! CDF envelopes, and firm-clustered bootstrap inference. A simulator with
//! explicit latent choice models provides ground truth for every
//! identification claim, so the estimators can be validated end to end
//! without access to proprietary payroll data.
//!
//! Modules mirror the stages of the pipeline:
//!
//! - [`data`]: CSV ingestion, validation, sample filters, lag joins
//! - [`empirical`]: empirical CDFs, point-mass detection, histograms
//! - [`boundary`]: one-sided local polynomial CDF/density limits at the kink
//! - [`counterfactual`]: estimators for the counterfactual bunching mass
//! - [`bounds`]: the g function and bi-log-concavity bounds on the buncher ATE
//! - [`policy`]: kink shifts, premium changes, and the ex-post decomposition
//! - [`inference`]: firm-clustered bootstrap and Imbens-Manski intervals
//! - [`simulate`]: synthetic panels from latent choice models, plus oracles
//!
//! Inner loops (bootstrap replicates, simulation, Monte-Carlo sweeps) run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential execution otherwise; results are bit-identical either way.

// `!(x > 0.0)` deliberately treats NaN as a violation; the positive
// comparison would wave it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod bounds;
pub mod counterfactual;
pub mod data;
pub mod empirical;
mod error;
pub mod inference;
pub mod normal;
pub mod par;
pub mod policy;
pub mod report;
mod rng;
pub mod simulate;

pub use error::{Error, Result};

/// Hours are recorded on a 1/8-hour grid.
pub const HOURS_GRID: f64 = 0.125;

/// Half a grid step; values within this distance of a grid point (or of the
/// kink) are treated as sitting exactly on it.
pub const GRID_TOL: f64 = 0.0625;

/// Default kink location: the 40-hour overtime threshold.
pub const DEFAULT_KINK: f64 = 40.0;

/// Default overtime premium factor.
pub const DEFAULT_PREMIUM: f64 = 1.5;
