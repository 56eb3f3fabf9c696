use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DiagError, Start};
use crate::engine::{simulate, simulate_gillespie, BoundaryPolicy};
use crate::lattice::{Kernel, Site};
use crate::noise::{derive_seed, HarrisNoise};
use crate::parallel::try_replicas;
use crate::rates::RateFn;
use crate::stats::{chi_square_homogeneity_map, ChiSquare};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OracleReport {
    pub chi: ChiSquare,
    pub alpha: f64,
    pub pass: bool,
    pub replicas: usize,
    pub seed: u64,
    /// Distinct joint occupancy vectors seen.
    pub categories: usize,
}

/// Two-sample chi-square on the joint histogram of `(eta_T(x))_{x in window}`
/// from the graphical construction and from the Gillespie sampler, each with
/// `replicas` independent runs.
#[allow(clippy::too_many_arguments)]
pub fn harris_vs_gillespie(
    start: &Start,
    rate: &RateFn,
    kernel: &Kernel,
    policy: BoundaryPolicy,
    horizon: f64,
    window: &[Site],
    replicas: usize,
    seed: u64,
    alpha: f64,
) -> Result<OracleReport, DiagError> {
    let joint = |c: &crate::config::Configuration| -> Vec<u32> { window.iter().map(|&x| c.get(x)).collect() };
    let harris = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let t = simulate(&start.draw(s), rate, kernel, &policy, horizon, &HarrisNoise::new(s))?;
        Ok(joint(&t.final_config))
    })?;
    let gill = try_replicas(derive_seed(seed, u64::MAX), replicas, |_, s| -> Result<_, DiagError> {
        let t = simulate_gillespie(&start.draw(s), rate, kernel, &policy, horizon, s)?;
        Ok(joint(&t.final_config))
    })?;
    let count = |v: Vec<Vec<u32>>| {
        let mut m: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for k in v {
            *m.entry(k).or_insert(0) += 1;
        }
        m
    };
    let (a, b) = (count(harris), count(gill));
    let categories = a.keys().chain(b.keys()).collect::<std::collections::BTreeSet<_>>().len();
    let chi = chi_square_homogeneity_map(&a, &b);
    Ok(OracleReport { pass: chi.passes(alpha), chi, alpha, replicas, seed, categories })
}
