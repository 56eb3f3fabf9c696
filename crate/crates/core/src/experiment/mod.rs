//! Batch experiments: a JSON config names the model, the initial condition,
//! the boundary, and a list of diagnostics; [`run`] executes them and writes
//! event logs, reports, and a manifest to an output directory.
//!
//! ```json
//! {
//!   "name": "poisson_case",
//!   "kernel": {"d": 1, "support": [{"z": [1], "p": 0.5}, {"z": [-1], "p": 0.5}]},
//!   "rate": {"family": "power", "a": 1.0},
//!   "initial": {"kind": "fugacity", "phi": 1.0},
//!   "boundary": {"kind": "periodic", "side": 11},
//!   "horizon": 2.0,
//!   "replicas": 2000,
//!   "seed": 7,
//!   "diagnostics": [{"test": "stationarity"}]
//! }
//! ```

mod run;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigRule, Configuration, ConfigurationJson, SiteCount};
use crate::diagnostics::{DiagError, LocalFunction, Start};
use crate::engine::{BoundaryPolicy, Labelling, SimError};
use crate::hitting::{HittingError, TailMethod};
use crate::lattice::{Kernel, KernelSpec, Site, Torus};
use crate::measures::{FugacityMeasure, ProductBoxSampler, TorusProductSampler};
use crate::rates::{RateFn, RateSpec};

pub use run::{run, run_config, OutputFormat, RunOptions, RunSummary};

/// Default number of grid points for the growth-exponent fit.
pub const DEFAULT_FIT_WINDOW: usize = 50;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub kernel: KernelSpec,
    pub rate: RateSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSpec>,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_fit_window")]
    pub fit_window: usize,
    /// Number of replicas whose full event log is written.
    #[serde(default = "default_event_logs")]
    pub event_logs: usize,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_replicas() -> usize {
    1000
}
fn default_fit_window() -> usize {
    DEFAULT_FIT_WINDOW
}
fn default_event_logs() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit { sites: Vec<SiteCount> },
    /// `mu_phi` on `[-n, n]^d`, or on the whole torus when `n` is absent
    /// under a periodic boundary.
    Fugacity { phi: f64, n: Option<i64> },
    /// `eta(x) = density` on `[-n, n]^d`.
    Constant { density: u32, n: i64 },
    /// `eta(x) = ||x||` on `[-n, n]^d`.
    AbsValue { n: i64 },
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    #[default]
    Open,
    Killed { n: i64 },
    Periodic { side: i64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `1{eta(x) = k}`
    Indicator { x: Vec<i64>, k: u32 },
    /// `min(eta(x), m)`
    MinOccupancy { x: Vec<i64>, m: u32 },
    Product { factors: Vec<FunctionSpec> },
}

fn alpha_stat() -> f64 {
    0.01
}
fn alpha_oracle() -> f64 {
    0.001
}
fn grid_default() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "test", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticSpec {
    /// Chi-square of `eta_T(0)` against `mu_phi` (fugacity start) or
    /// against `eta_0(0)`.
    Stationarity {
        #[serde(default = "alpha_stat")]
        alpha: f64,
    },
    /// Global balance of the canonical measure with `particles` particles.
    StationarityExact { particles: u32 },
    Mass {
        #[serde(default)]
        rho: Option<f64>,
    },
    Martingale {
        function: FunctionSpec,
        #[serde(default = "grid_default")]
        grid_points: usize,
    },
    Forward { function: FunctionSpec, times: Vec<f64>, delta: f64 },
    Oracle {
        window: Vec<Vec<i64>>,
        #[serde(default = "alpha_oracle")]
        alpha: f64,
    },
    JInequality { zeta: Vec<SiteCount>, psi: Vec<SiteCount> },
    Flux { phi: f64, side: i64 },
    Sandwich {
        pq: Vec<(f64, f64)>,
        #[serde(default)]
        labelling: Labelling,
    },
    Schedule {
        levels: Vec<i64>,
        #[serde(default = "grid_default")]
        grid_points: usize,
    },
    Hitting {
        z: Vec<i64>,
        grid: Vec<f64>,
        #[serde(default)]
        exact_radius: Option<i64>,
    },
    Mbar {
        z: Vec<i64>,
        #[serde(default)]
        cutoff: Option<usize>,
        #[serde(default = "no_tail")]
        tail: TailMethod,
    },
    ExpMoment {
        z: Vec<i64>,
        theta: f64,
        #[serde(default = "grid_default")]
        grid_points: usize,
    },
    Corollary { n_max: u64 },
}

fn no_tail() -> TailMethod {
    TailMethod::None
}

impl DiagnosticSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DiagnosticSpec::Stationarity { .. } => "stationarity",
            DiagnosticSpec::StationarityExact { .. } => "stationarity_exact",
            DiagnosticSpec::Mass { .. } => "mass",
            DiagnosticSpec::Martingale { .. } => "martingale",
            DiagnosticSpec::Forward { .. } => "forward",
            DiagnosticSpec::Oracle { .. } => "oracle",
            DiagnosticSpec::JInequality { .. } => "j_inequality",
            DiagnosticSpec::Flux { .. } => "flux",
            DiagnosticSpec::Sandwich { .. } => "sandwich",
            DiagnosticSpec::Schedule { .. } => "schedule",
            DiagnosticSpec::Hitting { .. } => "hitting",
            DiagnosticSpec::Mbar { .. } => "mbar",
            DiagnosticSpec::ExpMoment { .. } => "exp_moment",
            DiagnosticSpec::Corollary { .. } => "corollary",
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Exit code 1.
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },
    /// Exit code 1.
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// Exit code 3.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config { .. } | ExperimentError::Io { .. } => 1,
            ExperimentError::Invariant(_) => 3,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl ToString) -> Self {
        ExperimentError::Config { field: field.into(), message: message.to_string() }
    }

    fn from_sim(field: &str, e: SimError) -> Self {
        match e {
            SimError::CouplingViolation(_) | SimError::EventLimit => ExperimentError::Invariant(e.to_string()),
            other => ExperimentError::config(field, other),
        }
    }

    pub(crate) fn from_diag(field: &str, e: DiagError) -> Self {
        match e {
            DiagError::Invariant(m) => ExperimentError::Invariant(m),
            DiagError::Sim(s) => Self::from_sim(field, s),
            other => ExperimentError::config(field, other),
        }
    }

    pub(crate) fn from_hitting(field: &str, e: HittingError) -> Self {
        match e {
            HittingError::Sim(s) => Self::from_sim(field, s),
            other => ExperimentError::config(field, other),
        }
    }
}

impl From<(&str, SimError)> for ExperimentError {
    fn from((field, e): (&str, SimError)) -> Self {
        Self::from_sim(field, e)
    }
}

/// A config with every spec turned into its runtime object.
#[derive(Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub kernel: Kernel,
    pub rate: RateFn,
    pub policy: BoundaryPolicy,
    pub start: Start,
    /// Deterministic initial conditions as a rule (for truncation schedules).
    pub rule: Option<ConfigRule>,
    pub measure: Option<Arc<FugacityMeasure>>,
}

impl ExperimentConfig {
    /// Parses JSON, reporting the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ExperimentError::config(if path == "." { "config".into() } else { path }, e.into_inner())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every spec against its invariants and builds the runtime objects.
    pub fn prepare(&self) -> Result<Prepared, ExperimentError> {
        let kernel = Kernel::from_spec(&self.kernel).map_err(|e| ExperimentError::config("kernel", e))?;
        let rate = RateFn::from_spec(&self.rate).map_err(|e| ExperimentError::config("rate", e))?;
        let d = kernel.dim();
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ExperimentError::config("horizon", format!("must be positive and finite, got {}", self.horizon)));
        }
        if self.replicas == 0 {
            return Err(ExperimentError::config("replicas", "must be at least 1"));
        }
        if self.fit_window < 10 {
            return Err(ExperimentError::config("fit_window", format!("must be at least 10, got {}", self.fit_window)));
        }
        let policy = match self.boundary {
            BoundarySpec::Open => BoundaryPolicy::Open,
            BoundarySpec::Killed { n } if n >= 0 => BoundaryPolicy::Killed { n },
            BoundarySpec::Periodic { side } if side >= 1 => BoundaryPolicy::Periodic { torus: Torus::with_side(side, d) },
            _ => return Err(ExperimentError::config("boundary", "box size must be non-negative and torus side positive")),
        };
        let box_n = |n: i64, field: &str| -> Result<i64, ExperimentError> {
            if n < 0 {
                Err(ExperimentError::config(field, format!("box radius must be non-negative, got {n}")))
            } else {
                Ok(n)
            }
        };
        let (start, rule, measure) = match &self.initial {
            InitialSpec::Explicit { sites } => {
                let c = Configuration::from_json(&ConfigurationJson { sites: sites.clone() }, d)
                    .map_err(|e| ExperimentError::config("initial.sites", e))?;
                (Start::Fixed(c.clone()), Some(ConfigRule::Explicit(c)), None)
            }
            InitialSpec::Fugacity { phi, n } => {
                let m = Arc::new(FugacityMeasure::new(&rate, *phi).map_err(|e| ExperimentError::config("initial.phi", e))?);
                let start = match (n, policy) {
                    (Some(n), _) => Start::Sampled(Arc::new(ProductBoxSampler { measure: m.clone(), n: box_n(*n, "initial.n")?, d })),
                    (None, BoundaryPolicy::Periodic { torus }) => {
                        Start::Sampled(Arc::new(TorusProductSampler { measure: m.clone(), torus }))
                    }
                    (None, _) => return Err(ExperimentError::config("initial.n", "required unless the boundary is periodic")),
                };
                (start, None, Some(m))
            }
            InitialSpec::Constant { density, n } => {
                let rule = ConfigRule::Constant { d, density: *density };
                (Start::Fixed(rule.window(box_n(*n, "initial.n")?)), Some(rule), None)
            }
            InitialSpec::AbsValue { n } => {
                let rule = ConfigRule::AbsValue { d };
                (Start::Fixed(rule.window(box_n(*n, "initial.n")?)), Some(rule), None)
            }
        };
        if let Start::Fixed(c) = &start {
            policy.check_initial(c).map_err(|e| ExperimentError::config("initial", e))?;
        }
        if let Some(i) = self.diagnostics.iter().position(|s| self.needs_torus(s) && !matches!(policy, BoundaryPolicy::Periodic { .. })) {
            return Err(ExperimentError::config(
                format!("diagnostics[{i}]"),
                format!("{} needs a periodic boundary", self.diagnostics[i].name()),
            ));
        }
        Ok(Prepared { config: self.clone(), kernel, rate, policy, start, rule, measure })
    }

    fn needs_torus(&self, s: &DiagnosticSpec) -> bool {
        matches!(
            s,
            DiagnosticSpec::Stationarity { .. } | DiagnosticSpec::StationarityExact { .. } | DiagnosticSpec::Mass { .. }
        )
    }
}

pub(crate) fn site(field: &str, coords: &[i64], d: usize) -> Result<Site, ExperimentError> {
    if coords.len() != d {
        return Err(ExperimentError::config(field, format!("expected {d} coordinates, got {}", coords.len())));
    }
    Site::from_coords(coords).map_err(|e| ExperimentError::config(field, e))
}

impl FunctionSpec {
    pub fn build(&self, field: &str, d: usize) -> Result<LocalFunction, ExperimentError> {
        Ok(match self {
            FunctionSpec::Indicator { x, k } => LocalFunction::indicator(site(field, x, d)?, *k),
            FunctionSpec::MinOccupancy { x, m } => LocalFunction::min_occupancy(site(field, x, d)?, *m),
            FunctionSpec::Product { factors } => LocalFunction::product(
                factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| f.build(&format!("{field}.factors[{i}]"), d))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "kernel": {"d": 1, "support": [{"z": [1], "p": 0.5}, {"z": [-1], "p": 0.5}]},
        "rate": {"family": "power", "a": 1.0},
        "initial": {"kind": "fugacity", "phi": 1.0},
        "boundary": {"kind": "periodic", "side": 5},
        "horizon": 1.0
    }"#;

    fn with(field: &str, value: serde_json::Value) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        v[field] = value;
        v.to_string()
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!((c.replicas, c.fit_window, c.event_logs, c.seed), (1000, 50, 1, 0));
        let p = c.prepare().unwrap();
        assert!(matches!(p.policy, BoundaryPolicy::Periodic { .. }));
        assert!(p.measure.is_some());
    }

    #[test]
    fn roundtrip() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn non_monotone_table_names_index() {
        let text = with("rate", serde_json::json!({"family": "table", "values": [0.0, 1.0, 3.0, 2.0, 5.0]}));
        let e = ExperimentConfig::from_json(&text).unwrap().prepare().err().unwrap();
        assert_eq!(e.exit_code(), 1);
        let msg = e.to_string();
        assert!(msg.contains("rate") && msg.contains("index 3"), "{msg}");
    }

    #[test]
    fn field_paths_in_parse_errors() {
        let text = with("initial", serde_json::json!({"kind": "fugacity", "phi": "one"}));
        let msg = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("at initial:") && msg.contains("expected f64"), "{msg}");
        let msg = ExperimentConfig::from_json(&with("replicas", serde_json::json!(-3))).unwrap_err().to_string();
        assert!(msg.contains("at replicas:"), "{msg}");
        let msg = ExperimentConfig::from_json(&with("horizonn", serde_json::json!(1))).unwrap_err().to_string();
        assert!(msg.contains("horizonn"), "{msg}");
    }

    #[test]
    fn semantic_errors() {
        for (field, value, needle) in [
            ("horizon", serde_json::json!(-1.0), "horizon"),
            ("replicas", serde_json::json!(0), "replicas"),
            ("fit_window", serde_json::json!(3), "fit_window"),
            ("boundary", serde_json::json!({"kind": "open"}), "initial.n"),
            ("kernel", serde_json::json!({"d": 1, "support": [{"z": [1], "p": 0.4}]}), "kernel"),
        ] {
            let e = ExperimentConfig::from_json(&with(field, value)).unwrap().prepare().err().unwrap();
            assert!(e.to_string().contains(needle), "{field}: {e}");
        }
    }

    #[test]
    fn torus_diagnostics_need_periodic_boundary() {
        let mut c = ExperimentConfig::from_json(BASE).unwrap();
        c.boundary = BoundarySpec::Open;
        c.initial = InitialSpec::Constant { density: 1, n: 2 };
        c.diagnostics = vec![DiagnosticSpec::Mass { rho: None }];
        let e = c.prepare().err().unwrap();
        assert!(e.to_string().contains("diagnostics[0]"), "{e}");
    }

    #[test]
    fn explicit_outside_torus_rejected() {
        let text = with("initial", serde_json::json!({"kind": "explicit", "sites": [{"x": [7], "n": 1}]}));
        let e = ExperimentConfig::from_json(&text).unwrap().prepare().err().unwrap();
        assert!(e.to_string().contains("initial"), "{e}");
    }
}
