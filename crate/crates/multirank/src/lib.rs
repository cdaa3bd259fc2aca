//! Distribution-free two-sample and K-sample tests for multivariate data.
//!
//! The pipeline: a hierarchical rank map sends a pooled sample in R^p to a
//! fixed grid in (0,1)^p ([`rank_map`]), vector-valued weight functions turn
//! grid positions into scores ([`weights`], optionally adapted to a
//! parametric family or projected against nuisance directions [`models`]),
//! and linear rank statistics with chi-square calibration test group
//! homogeneity ([`teststat`]). Exact finite-sample inference is available
//! through spacing statistics along a space-filling curve ([`exact`]), and
//! [`simulate`] provides calibration, power, and efficiency studies.

pub mod cli;
pub mod dd;
pub mod error;
pub mod exact;
pub mod models;
pub mod rank_map;
pub mod simulate;
pub mod teststat;
pub mod weights;

pub use error::{Error, Result};
