//! Spiked-eigenvalue analysis for noncentral random matrices.
//!
//! The crate covers three linked ensembles: the noncentral sample covariance
//! matrix (signal plus noise), the noncentral Fisher matrix (that covariance
//! whitened by an independent Wishart), and the sample canonical-correlation
//! matrix of two Gaussian blocks. For each it provides
//!
//! - Stieltjes-transform solvers for the limiting bulk laws ([`stieltjes`]),
//! - the deterministic spike-limit maps and phase-transition checks
//!   ([`phase`]),
//! - closed-form CLT variance scales for outlier eigenvalues
//!   ([`fluctuation`]),
//! - plug-in estimators recovering population spikes from observed spectra
//!   ([`estimator`]),
//! - a seeded, order-independent Monte Carlo harness ([`simulate`]),
//! - CSV ingestion and report emission for the command-line tool
//!   ([`dataset`], [`report`], [`cli`]).
//!
//! Everything is pure CPU math over `f64`; all randomness flows through a
//! counter-based generator keyed by (master seed, replication index), so any
//! experiment is reproducible bit-for-bit at any parallelism level.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod fluctuation;
pub mod linalg;
pub mod measure;
pub mod phase;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod stieltjes;

pub use error::{Error, Result};
pub use measure::{AspectRatios, DiscreteMeasure};
pub use stieltjes::{SpectralLaw, StSolution};
