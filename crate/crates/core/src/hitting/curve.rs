use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HittingError;
use crate::lattice::{Kernel, Site};
use crate::noise::stream_rng;
use crate::parallel::replicas as run_replicas;
use crate::stats::wilson;

/// Width of the reported Wilson intervals, in standard deviations.
pub const WILSON_Z: f64 = 4.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMethod {
    MonteCarlo,
    ExactAbsorbing,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub f: f64,
    /// Binomial standard error `sqrt(f (1 - f) / n)`; zero for exact curves.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HittingCurve {
    pub z: Vec<i64>,
    pub method: CurveMethod,
    pub replicas: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl HittingCurve {
    /// CSV with columns `t,F,CI_low,CI_high`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "F", "CI_low", "CI_high"])?;
        for p in &self.points {
            wr.write_record([p.t.to_string(), p.f.to_string(), p.ci_low.to_string(), p.ci_high.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// First visit of the rate-1 walk from `z` to the origin, if it happens by
/// `horizon`.
pub fn walk_hit_time<R: Rng + ?Sized>(kernel: &Kernel, z: Site, horizon: f64, rng: &mut R) -> Option<f64> {
    let mut x = z;
    let mut t = 0.0;
    while x != Site::ORIGIN {
        t += -(1.0 - rng.gen::<f64>()).ln();
        if t > horizon {
            return None;
        }
        x = x.offset(kernel.sample_jump(rng.gen::<f64>()));
    }
    Some(t)
}

pub(crate) fn check_site(kernel: &Kernel, z: Site) -> Result<(), HittingError> {
    if z.0[kernel.dim()..].iter().any(|&c| c != 0) {
        return Err(HittingError::Invalid(format!("site {z} has coordinates beyond d = {}", kernel.dim())));
    }
    Ok(())
}

/// Monte Carlo estimate of `F_z` on `grid` from `replicas` walks run to the
/// largest grid time. The estimate is the empirical CDF of one sample of
/// hitting times, so it is non-decreasing along the sorted grid.
pub fn estimate_f(kernel: &Kernel, z: Site, grid: &[f64], replicas: usize, seed: u64) -> Result<HittingCurve, HittingError> {
    check_site(kernel, z)?;
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(HittingError::Invalid(format!("time grid must be finite and non-negative: {grid:?}")));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let horizon = grid.last().copied().unwrap_or(0.0);
    let mut hits: Vec<f64> = run_replicas(seed, replicas, |_, s| walk_hit_time(kernel, z, horizon, &mut stream_rng(s, 0)))
        .into_iter()
        .flatten()
        .collect();
    hits.sort_by(f64::total_cmp);
    let n = replicas as u64;
    let points = grid
        .iter()
        .map(|&t| {
            let k = hits.partition_point(|&h| h <= t) as u64;
            let f = if n == 0 { 0.0 } else { k as f64 / n as f64 };
            let (ci_low, ci_high) = wilson(k, n, WILSON_Z);
            CurvePoint { t, f, se: (f * (1.0 - f) / n.max(1) as f64).sqrt(), ci_low, ci_high }
        })
        .collect();
    Ok(HittingCurve { z: z.coords(kernel.dim()).to_vec(), method: CurveMethod::MonteCarlo, replicas, seed, points })
}
