//! Intersectional bias mitigation for static word embeddings.
//!
//! Pipeline: load an embedding table, fit warmth and competence bias
//! directions from antonym-pair difference vectors (first principal
//! component), build compound (gender x race) identity vectors by
//! summation or concatenation, attenuate the bias subspace with one of
//! three operators (Subtraction, Linear Projection, Partial Projection),
//! and score semantic preservation with ECT (rank stability) and EQT
//! (analogy completion) over seeded repetitions.

pub mod compound;
pub mod config;
pub mod debias;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod report;
pub mod runner;
pub mod subspace;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use report::ExperimentReport;
pub use runner::run_experiment;
