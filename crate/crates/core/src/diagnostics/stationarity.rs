use std::collections::HashMap;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{DiagError, Start};
use crate::config::{ConfigRule, Configuration};
use crate::engine::{simulate, simulate_truncation_schedule, BoundaryPolicy};
use crate::lattice::{Kernel, Site, Torus};
use crate::measures::{canonical_torus_measure, ConfigSampler, FugacityMeasure};
use crate::noise::{derive_seed, HarrisNoise};
use crate::parallel::try_replicas;
use crate::rates::RateFn;
use crate::stats::{chi_square_gof, chi_square_homogeneity, histogram, ChiSquare, Summary};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExactStationarity {
    pub sites: usize,
    pub particles: u32,
    pub states: usize,
    /// `max_j |sum_i pi_i Q_ij|`.
    pub residual: f64,
    /// `max_i |Q_ii|`.
    pub scale: f64,
    pub pass: bool,
}

/// Global balance of the canonical measure under the periodic chain with the
/// folded kernel, from the full rate matrix on `{sum eta = N}`. Passes iff
/// the residual is at most `1e-12` times the largest exit rate.
pub fn stationarity_exact(rate: &RateFn, kernel: &Kernel, torus: Torus, particles: u32) -> Result<ExactStationarity, DiagError> {
    if kernel.dim() != torus.d {
        return Err(DiagError::Invalid(format!("kernel dimension {} on a {}-dimensional torus", kernel.dim(), torus.d)));
    }
    let canon = canonical_torus_measure(rate, torus, particles)?;
    let (residual, scale) = global_balance(rate, kernel, torus, &canon.states, &canon.probs)?;
    Ok(ExactStationarity {
        sites: torus.volume(),
        particles,
        states: canon.states.len(),
        residual,
        scale,
        pass: residual <= 1e-12 * scale.max(1.0),
    })
}

/// `(max_j |sum_i pi_i Q_ij|, max_i |Q_ii|)` for the periodic chain on the
/// given states (occupancies in `torus.sites()` order).
fn global_balance(
    rate: &RateFn,
    kernel: &Kernel,
    torus: Torus,
    states: &[Vec<u32>],
    probs: &[f64],
) -> Result<(f64, f64), DiagError> {
    let sites = torus.sites();
    let index: HashMap<&[u32], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let site_index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let n = states.len();
    let mut flow = vec![0.0; n];
    let mut scale: f64 = 0.0;
    let mut next = vec![0u32; sites.len()];
    for (i, state) in states.iter().enumerate() {
        let pi = probs[i];
        let mut exit = 0.0;
        for (xi, &x) in sites.iter().enumerate() {
            if state[xi] == 0 {
                continue;
            }
            let g = rate.g(state[xi] as u64)?;
            for (z, p) in kernel.support() {
                let yi = site_index[&torus.wrap(x.offset(z))];
                if yi == xi || p == 0.0 {
                    continue;
                }
                next.copy_from_slice(state);
                next[xi] -= 1;
                next[yi] += 1;
                let q = g * p;
                flow[index[next.as_slice()]] += pi * q;
                exit += q;
            }
        }
        flow[i] -= pi * exit;
        scale = scale.max(exit);
    }
    let residual = flow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((residual, scale))
}

/// What `eta_T(0)` is compared against.
#[derive(Clone, Debug)]
pub enum Reference {
    /// The `mu_phi` marginal (grand-canonical start).
    Marginal(Arc<FugacityMeasure>),
    /// The empirical `eta_0(0)` histogram of the same replicas.
    Initial,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StatisticalStationarity {
    pub chi: ChiSquare,
    pub alpha: f64,
    pub pass: bool,
    pub replicas: usize,
    pub seed: u64,
    pub histogram_initial: Vec<u64>,
    pub histogram_final: Vec<u64>,
}

/// Chi-square test of the law of `eta_T(0)` on a torus at level `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn stationarity_statistical(
    start: &Start,
    reference: &Reference,
    rate: &RateFn,
    kernel: &Kernel,
    torus: Torus,
    horizon: f64,
    replicas: usize,
    seed: u64,
    alpha: f64,
) -> Result<StatisticalStationarity, DiagError> {
    let policy = BoundaryPolicy::Periodic { torus };
    let origin = Site::ORIGIN;
    let pairs: Vec<(u64, u64)> = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let init = start.draw(s);
        let end = if horizon > 0.0 {
            simulate(&init, rate, kernel, &policy, horizon, &HarrisNoise::new(s))?.final_config
        } else {
            init.clone()
        };
        Ok((init.get(origin) as u64, end.get(origin) as u64))
    })?;
    let h0 = histogram(pairs.iter().map(|p| p.0));
    let ht = histogram(pairs.iter().map(|p| p.1));
    let chi = match reference {
        Reference::Marginal(m) => chi_square_gof(&ht, m.probs()),
        Reference::Initial => chi_square_homogeneity(&h0, &ht),
    };
    Ok(StatisticalStationarity {
        pass: chi.passes(alpha),
        chi,
        alpha,
        replicas,
        seed,
        histogram_initial: h0,
        histogram_final: ht,
    })
}

/// Negative control: every particle of the inner sample moved to the origin.
pub struct Concentrated<S>(pub S);

impl<S: ConfigSampler> ConfigSampler for Concentrated<S> {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration {
        let c = self.0.sample(rng);
        let mut out = Configuration::empty(c.dim());
        out.add(Site::ORIGIN, c.total() as u32);
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MassReport {
    pub replicas: usize,
    /// Replicas whose total count never changed.
    pub conserved: usize,
    pub mean_origin: f64,
    pub se: f64,
    pub rho: f64,
    pub pass: bool,
}

/// Torus run: exact per-replica conservation audit and `E[eta_T(0)]` against
/// `rho` within 4 standard errors. An audit failure is an error.
#[allow(clippy::too_many_arguments)]
pub fn mass_conservation_check(
    start: &Start,
    rate: &RateFn,
    kernel: &Kernel,
    torus: Torus,
    horizon: f64,
    replicas: usize,
    seed: u64,
    rho: f64,
) -> Result<MassReport, DiagError> {
    let policy = BoundaryPolicy::Periodic { torus };
    let runs: Vec<(bool, f64)> = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let init = start.draw(s);
        let traj = simulate(&init, rate, kernel, &policy, horizon, &HarrisNoise::new(s))?;
        traj.audit().map_err(|e| DiagError::Invariant(format!("replica seed {s}: {e}")))?;
        let mut c = init.clone();
        let mut constant = true;
        for e in &traj.events {
            e.apply(&mut c);
            constant &= c.total() == init.total();
        }
        Ok((constant, traj.final_config.get(Site::ORIGIN) as f64))
    })?;
    let conserved = runs.iter().filter(|r| r.0).count();
    if conserved != replicas {
        return Err(DiagError::Invariant(format!("{} of {replicas} torus replicas changed their total", replicas - conserved)));
    }
    let s = Summary::of(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(MassReport { replicas, conserved, mean_origin: s.mean, se: s.se, rho, pass: s.within(rho, 4.0) })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleMassReport {
    pub levels: Vec<i64>,
    /// `(n, mean eta^n_T(0), se)`.
    pub means: Vec<(i64, f64, f64)>,
    pub rho: f64,
    /// Every replica had `eta^n_T(0)` non-decreasing in `n`.
    pub monotone: bool,
    pub pass: bool,
}

/// Open-lattice version: truncations of an i.i.d. `mu_phi` configuration on
/// shared noise; `E[eta^n_T(0)]` increases in `n` and must be within 4
/// standard errors of `rho = R(phi)` at the largest level.
pub fn mass_schedule_check(
    measure: &Arc<FugacityMeasure>,
    kernel: &Kernel,
    schedule: &[i64],
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<ScheduleMassReport, DiagError> {
    let d = kernel.dim();
    let rate = measure.rate().clone();
    let runs: Vec<Vec<u32>> = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let rule = ConfigRule::Fugacity { measure: measure.clone(), d, seed: derive_seed(s, 1) };
        let run = simulate_truncation_schedule(&rule, schedule, &rate, kernel, horizon, s, 1)?;
        Ok(run.trajectories.iter().map(|t| t.final_config.get(Site::ORIGIN)).collect())
    })?;
    let monotone = runs.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    let means: Vec<(i64, f64, f64)> = schedule
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = Summary::of(&runs.iter().map(|r| r[i] as f64).collect::<Vec<_>>());
            (n, s.mean, s.se)
        })
        .collect();
    let rho = measure.density();
    let &(_, m, se) = means.last().ok_or_else(|| DiagError::Invalid("empty schedule".into()))?;
    Ok(ScheduleMassReport { levels: schedule.to_vec(), rho, monotone, pass: monotone && (m - rho).abs() <= 4.0 * se, means })
}
