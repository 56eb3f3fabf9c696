//! Zero-range processes with non-decreasing, possibly superlinear jump rates.
//!
//! A site holding `k` particles releases one at rate `g(k)`; the particle moves
//! by an offset drawn from a translation-invariant kernel `p`. The crate builds
//! these processes pathwise from marked Poisson clocks, so one noise realization
//! drives every coupled copy (ordered initial states, truncation levels,
//! boundary policies, the nearest-neighbour `(p, q)` family), and provides the
//! checks that go with that construction: invariant product measures, exact
//! and statistical stationarity, martingale and forward-equation residuals,
//! discrepancy and flux tests, and hitting-time bounds on particle arrivals.
//!
//! Module map:
//!
//! - [`lattice`]: sites, tori, jump kernels
//! - [`rates`]: rate functions `g` and the increment envelope `h`
//! - [`measures`]: `mu_phi`, partition functions, canonical torus measures
//! - [`config`]: configurations, trajectories, event logs
//! - [`noise`]: seed splitting and the per-site Poisson clocks
//! - [`engine`]: graphical-construction and Gillespie simulators
//! - [`diagnostics`]: generator, martingale, stationarity, flux checks
//! - [`hitting`]: hitting curves and arrival bounds
//! - [`experiment`], [`suite`]: batch runs and the acceptance matrix

pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod experiment;
pub mod hitting;
pub mod lattice;
pub mod measures;
pub mod noise;
pub mod parallel;
pub mod rates;
pub mod stats;
pub mod suite;

pub use config::{Configuration, Event, EventKind, Trajectory};
pub use engine::{BoundaryPolicy, SimError};
pub use lattice::{Kernel, Site, Torus};
pub use measures::FugacityMeasure;
pub use noise::HarrisNoise;
pub use rates::RateFn;
