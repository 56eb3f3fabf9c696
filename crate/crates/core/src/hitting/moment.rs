use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mbar::{mbar, MbarOptions, MbarReport};
use super::HittingError;
use crate::config::Configuration;
use crate::engine::{simulate, time_grid, BoundaryPolicy};
use crate::lattice::{Kernel, Site};
use crate::noise::{derive_seed, stream_rng, HarrisNoise};
use crate::parallel::try_replicas;
use crate::rates::RateFn;
use crate::stats::{log_mean_exp, Summary};

const BOOTSTRAP: usize = 400;
/// Two-sided bootstrap level of the reported interval.
const LEVEL: f64 = 0.95;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MomentPoint {
    pub s: f64,
    /// `log mean exp(theta eta_s(z))`
    pub log_mgf: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExpMomentReport {
    pub theta: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub points: Vec<MomentPoint>,
    pub mbar: MbarReport,
    /// `(e^theta - 1) mbar_z(T, eta_0)`
    pub bound: f64,
    pub mgf_pass: bool,
    /// `E[eta_s(z)] <= mbar + 4 SE` at every grid time.
    pub first_moment_pass: bool,
    pub pass: bool,
}

/// Compares the empirical log-MGF of `eta_s(z)` on an evenly spaced grid of
/// `grid_points` times in `(0, T]` (plus `s = 0`) against
/// `(e^theta - 1) mbar_z(T, eta_0)`, using the upper end of a percentile
/// bootstrap interval.
#[allow(clippy::too_many_arguments)]
pub fn exp_moment_check(
    eta0: &Configuration,
    z: Site,
    rate: &RateFn,
    kernel: &Kernel,
    theta: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
    grid_points: usize,
    mbar_opts: &MbarOptions,
) -> Result<ExpMomentReport, HittingError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(HittingError::Invalid(format!("theta must be positive, got {theta}")));
    }
    if replicas < 2 {
        return Err(HittingError::Invalid("need at least 2 replicas".into()));
    }
    let m = mbar(eta0, z, horizon, rate, kernel, mbar_opts)?;
    let bound = theta.exp_m1() * m.total;
    let mut times = vec![0.0];
    if horizon > 0.0 {
        times.extend(time_grid(horizon, grid_points.max(1)));
    }

    let counts: Vec<Vec<u32>> = try_replicas(seed, replicas, |_, s| -> Result<_, HittingError> {
        if horizon == 0.0 {
            return Ok(vec![eta0.get(z)]);
        }
        let traj = simulate(eta0, rate, kernel, &BoundaryPolicy::Open, horizon, &HarrisNoise::new(s))?;
        Ok(traj.snapshots(&times).iter().map(|c| c.get(z)).collect())
    })?;

    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP); times.len()];
    let mut rng = stream_rng(derive_seed(seed, u64::MAX - 1), 0);
    let mut sample = vec![0.0; replicas];
    let mut picks = vec![0usize; replicas];
    for _ in 0..BOOTSTRAP {
        picks.iter_mut().for_each(|p| *p = rng.gen_range(0..replicas));
        for (j, b) in boot.iter_mut().enumerate() {
            for (v, &p) in sample.iter_mut().zip(&picks) {
                *v = theta * counts[p][j] as f64;
            }
            b.push(log_mean_exp(&sample));
        }
    }
    let quantile = |v: &mut Vec<f64>, q: f64| {
        v.sort_by(f64::total_cmp);
        v[((v.len() - 1) as f64 * q).round() as usize]
    };
    let tail = (1.0 - LEVEL) / 2.0;
    let points: Vec<MomentPoint> = times
        .iter()
        .zip(boot.iter_mut())
        .enumerate()
        .map(|(j, (&s, b))| {
            let xs: Vec<f64> = counts.iter().map(|c| c[j] as f64).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| theta * x).collect();
            let sum = Summary::of(&xs);
            MomentPoint {
                s,
                log_mgf: log_mean_exp(&scaled),
                ci_low: quantile(b, tail),
                ci_high: quantile(b, 1.0 - tail),
                mean: sum.mean,
                se: sum.se,
            }
        })
        .collect();
    let mgf_pass = points.iter().all(|p| p.ci_high <= bound);
    let first_moment_pass = points.iter().all(|p| p.mean <= m.total + 4.0 * p.se);
    Ok(ExpMomentReport {
        theta,
        horizon,
        replicas,
        seed,
        points,
        mbar: m,
        bound,
        mgf_pass,
        first_moment_pass,
        pass: mgf_pass && first_moment_pass,
    })
}
