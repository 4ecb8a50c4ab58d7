//! Detection and testing of correlation structure among the trading
//! strategies of exchange member institutions.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`]: trade records from delimited text, hourly bucketing per month
//! - [`strategy`]: ternary (+1/-1/0) strategy matrices with the activity filter
//! - [`spectra`]: correlation matrices, tail probabilities, eigenvalues and the
//!   Marchenko-Pastur null
//! - [`bootstrap`]: row-shuffle null bands for the largest eigenvalues
//! - [`cluster`]: complete-linkage clustering on `d = sqrt(2(1 - rho))`
//! - [`persistence`]: code unscrambling, consecutive-month regression and the
//!   minority-membership test
//! - [`synth`]: synthetic order flow with planted structure and ground truth
//! - [`report`]: configuration, table emission and the end-to-end pipeline

pub mod bootstrap;
pub mod cluster;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod persistence;
pub mod report;
pub mod seed;
pub mod spectra;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
