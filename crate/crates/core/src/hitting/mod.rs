//! Hitting times of the rate-1 walk and the arrival bound built from them.
//!
//! `F_z(t)` is the probability that the continuous-time walk with jump
//! kernel `p`, started at `z`, visits the origin by time `t`. Particle `i` of
//! an enumeration (ordered by distance to the target site) moves at most as
//! fast as a walk sped up by `h(i)`, which gives
//! `mbar_z(t, eta) = sum_i F_{x^i - z}(h(i) t)`, an upper bound on the
//! expected number of particles that reach `z` by time `t`.

mod curve;
mod enumerate;
mod exact;
mod mbar;
mod moment;

use thiserror::Error;

use crate::engine::SimError;
use crate::rates::RateError;

pub use curve::{estimate_f, walk_hit_time, CurveMethod, CurvePoint, HittingCurve, WILSON_Z};
pub use enumerate::{enumerate_particles, Enumeration};
pub use exact::{exact_f_small, max_radius, Bracket};
pub use mbar::{calibrate_doob, mbar, MbarOptions, MbarReport, MbarTerm, TailMethod, TermMethod, DOOB_INFLATION};
pub use moment::{exp_moment_check, ExpMomentReport, MomentPoint};

#[derive(Debug, Error)]
pub enum HittingError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("exact hitting solve supports d <= 2, got d = {0}")]
    Dimension(usize),
    #[error("box radius {radius} exceeds the limit {max} for d = {d}")]
    BoxTooLarge { d: usize, radius: i64, max: i64 },
    #[error("start {0} lies outside the box of radius {1}")]
    OutsideBox(String, i64),
    #[error("doob tail needs a mean-zero kernel, drift is {0:?}")]
    Drift(Vec<f64>),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
