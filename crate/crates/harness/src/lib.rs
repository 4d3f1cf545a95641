//! Benchmark harness for the `svrhmc-core` samplers.
//!
//! Loads libsvm and delimited datasets, runs multi-chain, multi-seed
//! experiments on the synthetic Gaussian, Bayesian logistic regression and
//! Bayesian linear regression tasks, and writes CSV traces keyed by data
//! passes (component-gradient evaluations divided by `n`).

pub mod accountant;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod trace;

pub use config::{ExperimentConfig, Task};
pub use error::{HarnessError, Result};
pub use experiment::{run, ExperimentOutput};
