//! Checks run against the simulator: generator evaluation, martingale and
//! forward-equation residuals, exact and statistical stationarity, mass
//! conservation, the `j` discrepancy inequality, Poisson flux, and the
//! Harris/Gillespie cross-check.
//!
//! Statistical checks take a master seed and a replica count; replica `i`
//! runs on `derive_seed(master, i)` (see [`crate::parallel`]), so reports are
//! reproducible and independent of the thread count.

mod discrepancy;
mod flux;
mod generator;
mod local;
mod martingale;
mod oracle;
mod stationarity;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Configuration;
use crate::engine::SimError;
use crate::measures::{ConfigSampler, MeasureError};
use crate::noise::stream_rng;
use crate::rates::RateError;

pub use discrepancy::{j_discrepancy, j_inequality_check, JReport, JViolation};
pub use flux::{poisson_flux_check, FluxReport};
pub use generator::{generator_apply, Generator};
pub use local::LocalFunction;
pub use martingale::{
    forward_equation_check, martingale_residual, path_integrals, ForwardPoint, ForwardReport, MartingaleReport,
    PathSample,
};
pub use oracle::{harris_vs_gillespie, OracleReport};
pub use stationarity::{
    mass_conservation_check, mass_schedule_check, stationarity_exact, stationarity_statistical, Concentrated,
    ExactStationarity, MassReport, Reference, ScheduleMassReport, StatisticalStationarity,
};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("this check is defined for d = 1 only, got d = {0}")]
    Dimension(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// A hard invariant of the simulator failed (conservation, replay).
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Initial condition of a replica: fixed, or drawn from a sampler using the
/// replica's own stream.
#[derive(Clone)]
pub enum Start {
    Fixed(Configuration),
    Sampled(Arc<dyn ConfigSampler>),
}

/// Stream index reserved for initial-condition sampling.
const START_STREAM: u64 = 0x5747;

impl Start {
    pub fn draw(&self, replica_seed: u64) -> Configuration {
        match self {
            Start::Fixed(c) => c.clone(),
            Start::Sampled(s) => s.sample(&mut stream_rng(replica_seed, START_STREAM)),
        }
    }
}

impl fmt::Debug for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Start::Fixed(c) => f.debug_tuple("Fixed").field(c).finish(),
            Start::Sampled(_) => f.write_str("Sampled(..)"),
        }
    }
}

/// Uniform JSON summary of a check.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticReport {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub n_replicas: usize,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl DiagnosticReport {
    pub fn new(test: &str, statistic: f64, threshold: f64, pass: bool, seed: u64, n_replicas: usize) -> Self {
        DiagnosticReport { test: test.into(), statistic, threshold, pass, seed, n_replicas, details: serde_json::Value::Null }
    }

    pub fn with_details<T: Serialize>(mut self, details: &T) -> Self {
        self.details = serde_json::to_value(details).unwrap_or(serde_json::Value::Null);
        self
    }
}
