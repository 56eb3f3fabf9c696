use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DiagError;
use crate::engine::{simulate, BoundaryPolicy};
use crate::lattice::{Kernel, Site, Torus};
use crate::measures::{ConfigSampler, FugacityMeasure, TorusProductSampler};
use crate::noise::{stream_rng, HarrisNoise};
use crate::parallel::replicas as run_replicas;
use crate::rates::RateFn;
use crate::stats::{dispersion, Summary};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FluxReport {
    pub phi: f64,
    pub horizon: f64,
    pub sites: usize,
    pub replicas: usize,
    pub seed: u64,
    pub expected: f64,
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    pub dispersion: f64,
    pub dispersion_se: f64,
    pub pass: bool,
}

/// Number of `-1 -> 0` jumps over `[0, T]` for the totally asymmetric chain on
/// a torus with `side` sites, started from `mu_phi` on every site. Under
/// stationarity the count has mean `phi T`; its index of dispersion is
/// compared with 1.
pub fn poisson_flux_check(
    measure: &Arc<FugacityMeasure>,
    side: i64,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<FluxReport, DiagError> {
    if side < 2 {
        return Err(DiagError::Invalid(format!("torus needs at least 2 sites, got {side}")));
    }
    let torus = Torus::with_side(side, 1);
    let kernel = Kernel::nearest_neighbour(1.0).map_err(|e| DiagError::Invalid(e.to_string()))?;
    let rate: &RateFn = measure.rate();
    let sampler = TorusProductSampler { measure: measure.clone(), torus };
    let policy = BoundaryPolicy::Periodic { torus };
    let (from, to) = (torus.wrap(Site::d1(-1)), Site::d1(0));
    let counts: Vec<Result<f64, DiagError>> = run_replicas(seed, replicas, |_, s| {
        if horizon == 0.0 {
            return Ok(0.0);
        }
        let init = sampler.sample(&mut stream_rng(s, 0x5747));
        let t = simulate(&init, rate, &kernel, &policy, horizon, &HarrisNoise::new(s))?;
        Ok(t.events.iter().filter(|e| e.src == from && e.dst == to).count() as f64)
    });
    let counts: Vec<f64> = counts.into_iter().collect::<Result<_, _>>()?;
    let s = Summary::of(&counts);
    let expected = measure.phi() * horizon;
    let d = dispersion(&counts);
    let dispersion_ok = horizon == 0.0 || (d.index - 1.0).abs() <= 4.0 * d.se;
    Ok(FluxReport {
        phi: measure.phi(),
        horizon,
        sites: torus.volume(),
        replicas,
        seed,
        expected,
        mean: s.mean,
        se: s.se,
        variance: s.var,
        dispersion: d.index,
        dispersion_se: d.se,
        pass: s.within(expected, 4.0) && dispersion_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_counts_nothing() {
        let m = Arc::new(FugacityMeasure::new(&RateFn::linear(), 1.0).unwrap());
        let r = poisson_flux_check(&m, 5, 0.0, 100, 1).unwrap();
        assert_eq!((r.mean, r.variance), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn independent_walkers_flux() {
        let m = Arc::new(FugacityMeasure::new(&RateFn::linear(), 2.0).unwrap());
        let r = poisson_flux_check(&m, 21, 1.0, 4000, 2).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
