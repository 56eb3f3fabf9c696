use serde::{Deserialize, Serialize};

use super::DiagError;
use crate::config::Configuration;
use crate::engine::{coupled_walk, simulate, BoundaryPolicy};
use crate::lattice::{Kernel, Site};
use crate::noise::HarrisNoise;
use crate::parallel::try_replicas;
use crate::rates::RateFn;

/// `j(zeta, psi) = [sup_{n <= 0 <= m} sum_{x=n}^m (zeta(x) - psi(x))]^+` on
/// `Z`. The sup splits into a best left block ending at `-1` (possibly empty)
/// and a best right block starting at `0`.
pub fn j_discrepancy(zeta: &Configuration, psi: &Configuration) -> Result<u64, DiagError> {
    if zeta.dim() != 1 || psi.dim() != 1 {
        return Err(DiagError::Dimension(zeta.dim().max(psi.dim())));
    }
    let bounds = [zeta.bounding_box(), psi.bounding_box()];
    let lo = bounds.iter().flatten().map(|b| b.0 .0[0]).min().unwrap_or(0).min(0);
    let hi = bounds.iter().flatten().map(|b| b.1 .0[0]).max().unwrap_or(0).max(0);
    let diff = |x: i64| zeta.get(Site::d1(x)) as i64 - psi.get(Site::d1(x)) as i64;
    let (mut left, mut acc) = (0i64, 0i64);
    for x in (lo..0).rev() {
        acc += diff(x);
        left = left.max(acc);
    }
    let (mut right, mut acc) = (i64::MIN, 0i64);
    for x in 0..=hi {
        acc += diff(x);
        right = right.max(acc);
    }
    Ok((left + right).max(0) as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JViolation {
    pub replica: usize,
    pub seed: u64,
    pub time: f64,
    pub j: u64,
    pub bound: u64,
    /// Event logs of both coupled runs (CSV).
    pub zeta_log: String,
    pub psi_log: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JReport {
    pub replicas: usize,
    pub seed: u64,
    /// Event-time evaluations of the inequality.
    pub checks: usize,
    pub violations: Vec<JViolation>,
    pub pass: bool,
}

/// Checks `j(zeta_t, psi_t) <= j(zeta_0, psi_0) + N_t(psi)` after every event
/// of the shared-noise coupling with nearest-neighbour `(p, 1-p)` jumps,
/// `N_t(psi)` being the number of `psi` departures from 0.
pub fn j_inequality_check(
    zeta0: &Configuration,
    psi0: &Configuration,
    rate: &RateFn,
    p: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<JReport, DiagError> {
    let j0 = j_discrepancy(zeta0, psi0)?;
    let kernel = Kernel::nearest_neighbour(p).map_err(|e| DiagError::Invalid(e.to_string()))?;
    let origin = Site::d1(0);
    let per: Vec<(usize, Option<JViolation>)> = try_replicas(seed, replicas, |i, s| -> Result<_, DiagError> {
        if horizon == 0.0 {
            return Ok((1, None));
        }
        let noise = HarrisNoise::new(s);
        let tz = simulate(zeta0, rate, &kernel, &BoundaryPolicy::Open, horizon, &noise)?;
        let tp = simulate(psi0, rate, &kernel, &BoundaryPolicy::Open, horizon, &noise)?;
        let (mut checks, mut n_psi, mut bad) = (0usize, 0u64, None);
        coupled_walk(&[&tz, &tp], |time, states, fired| {
            n_psi += fired[1].iter().filter(|e| e.src == origin).count() as u64;
            checks += 1;
            let j = j_discrepancy(&states[0], &states[1]).expect("d = 1");
            if j > j0 + n_psi {
                bad = Some(JViolation {
                    replica: i,
                    seed: s,
                    time,
                    j,
                    bound: j0 + n_psi,
                    zeta_log: tz.csv_string(),
                    psi_log: tp.csv_string(),
                });
                return false;
            }
            true
        });
        Ok((checks, bad))
    })?;
    let checks = per.iter().map(|r| r.0).sum();
    let violations: Vec<JViolation> = per.into_iter().filter_map(|r| r.1).collect();
    Ok(JReport { replicas, seed, checks, pass: violations.is_empty(), violations })
}
