//! Product invariant measures `mu_phi`, their box restrictions, and the
//! exact fixed-particle-number measure on small tori.
//!
//! Single-site weights are `w(k) = prod_{j<=k} 1/g(j)` and the marginal is
//! `P(eta(x) = k) = w(k) phi^k / z(phi)`. Everything is kept in log space:
//! for superlinear `g` the weights underflow long before the tail is negligible.

use std::io;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Configuration;
use crate::lattice::{box_sites, Torus};
use crate::rates::{RateError, RateFn};

/// Default relative tolerance for partition sums.
pub const DEFAULT_TOL: f64 = 1e-14;

const MAX_TRUNCATION: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("fugacity must be positive and finite, got {0}")]
    BadFugacity(f64),
    #[error("cannot certify tail: rate table exhausted at k = {0} before phi/g(k) <= 1/2")]
    CannotCertifyTail(u64),
    #[error("truncation level exceeded {MAX_TRUNCATION} without reaching tolerance")]
    NoConvergence,
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("state space too large: {sites} sites, {particles} particles (limit 5 sites, 6 particles)")]
    StateSpaceTooLarge { sites: usize, particles: u32 },
}

/// Certified truncation of `z(phi) = sum_k w(k) phi^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub log_z: f64,
    pub k_trunc: u64,
    /// Upper bound on the neglected mass relative to `z`.
    pub tail_bound: f64,
}

/// Truncates the series at the first `K` with `phi / g(K+1) <= 1/2`, neglected
/// relative mass `<= tol` (geometric bound `w(K) phi^K r / (1 - r)`,
/// `r = phi / g(K+1)`), and last retained probability `<= tol`.
pub fn partition_function(rate: &RateFn, phi: f64, tol: f64) -> Result<Partition, MeasureError> {
    partition_terms(rate, phi, tol).map(|(p, _)| p)
}

/// The partition certificate together with `log(w(k) phi^k)` for `k <= K`.
fn partition_terms(rate: &RateFn, phi: f64, tol: f64) -> Result<(Partition, Vec<f64>), MeasureError> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(MeasureError::BadFugacity(phi));
    }
    let ln_phi = phi.ln();
    let mut terms = vec![0.0];
    let mut log_w = 0.0;
    // Running log-sum-exp: z = exp(shift) * (1 + rest).
    let (mut shift, mut rest) = (0.0f64, 0.0f64);
    let mut k = 0u64;
    loop {
        let next = match rate.log_g(k + 1) {
            Ok(v) => v,
            Err(RateError::TableExhausted(_)) | Err(RateError::Overflow(_)) => {
                return Err(MeasureError::CannotCertifyTail(k + 1))
            }
            Err(e) => return Err(e.into()),
        };
        let ratio = (ln_phi - next).exp();
        let log_z = shift + rest.ln_1p();
        if ratio <= 0.5 {
            let last = terms[k as usize] - log_z;
            let tail = (last + (ratio / (1.0 - ratio)).ln()).exp();
            if tail <= tol && last.exp() <= tol {
                return Ok((Partition { log_z, k_trunc: k, tail_bound: tail }, terms));
            }
        }
        k += 1;
        if k > MAX_TRUNCATION {
            return Err(MeasureError::NoConvergence);
        }
        log_w -= next;
        let t = log_w + k as f64 * ln_phi;
        terms.push(t);
        if t > shift {
            rest = (1.0 + rest) * (shift - t).exp();
            shift = t;
        } else {
            rest += (t - shift).exp();
        }
    }
}

/// `mu_phi` single-site marginal on `0..=k_trunc`.
#[derive(Clone, Debug)]
pub struct FugacityMeasure {
    phi: f64,
    rate: RateFn,
    partition: Partition,
    log_w: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

/// Serialized parameters of a [`FugacityMeasure`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FugacityMeasureJson {
    pub phi: f64,
    pub k_trunc: u64,
    pub tail_bound: f64,
    pub log_z: f64,
}

impl FugacityMeasure {
    pub fn new(rate: &RateFn, phi: f64) -> Result<Self, MeasureError> {
        Self::with_tolerance(rate, phi, DEFAULT_TOL)
    }

    pub fn with_tolerance(rate: &RateFn, phi: f64, tol: f64) -> Result<Self, MeasureError> {
        let (partition, terms) = partition_terms(rate, phi, tol)?;
        let ln_phi = phi.ln();
        let log_w: Vec<f64> = terms.iter().enumerate().map(|(k, t)| t - k as f64 * ln_phi).collect();
        let probs: Vec<f64> = terms.iter().map(|t| (t - partition.log_z).exp()).collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(FugacityMeasure { phi, rate: rate.clone(), partition, log_w, probs, cdf })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn rate(&self) -> &RateFn {
        &self.rate
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn k_trunc(&self) -> u64 {
        self.partition.k_trunc
    }

    pub fn log_w(&self, k: usize) -> f64 {
        self.log_w[k]
    }

    /// `P(eta(x) = k)` for `k <= k_trunc`, zero beyond.
    pub fn pmf(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `R(phi) = E[eta(x)]`.
    pub fn density(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.density();
        self.probs.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
    }

    /// `E[g(eta(x))]`, which equals `phi` up to truncation.
    pub fn fugacity_identity(&self) -> f64 {
        (1..self.probs.len())
            .map(|k| {
                let lg = self.rate.log_g(k as u64).expect("in range by construction");
                (lg + self.probs[k].ln()).exp()
            })
            .sum()
    }

    /// `E[g(eta(x))^2]`.
    pub fn rate_second_moment(&self) -> f64 {
        (1..self.probs.len())
            .map(|k| {
                let lg = self.rate.log_g(k as u64).expect("in range by construction");
                (2.0 * lg + self.probs[k].ln()).exp()
            })
            .sum()
    }

    /// `log E[e^{theta eta(x)}]` over the truncated support.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        let terms: Vec<f64> = self.probs.iter().enumerate().map(|(k, p)| p.ln() + theta * k as f64).collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    /// Inverse CDF, clamped to `k_trunc`.
    pub fn sample_marginal(&self, u: f64) -> u64 {
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.probs.len() - 1) as u64
    }

    /// Independent marginals on `[-n, n]^d`, sites visited in lexicographic order.
    pub fn sample_box_config<R: Rng + ?Sized>(&self, n: i64, d: usize, rng: &mut R) -> Configuration {
        Configuration::from_pairs(
            d,
            box_sites(n, d).into_iter().map(|x| (x, self.sample_marginal(rng.gen::<f64>()) as u32)),
        )
    }

    pub fn to_json(&self) -> FugacityMeasureJson {
        FugacityMeasureJson {
            phi: self.phi,
            k_trunc: self.partition.k_trunc,
            tail_bound: self.partition.tail_bound,
            log_z: self.partition.log_z,
        }
    }

    /// `k,p_k` table.
    pub fn write_marginal_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "p_k"])?;
        for (k, p) in self.probs.iter().enumerate() {
            wr.write_record([k.to_string(), format!("{p:?}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Anything that draws finite configurations from an RNG.
pub trait ConfigSampler: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration;
}

/// `mu_phi` restricted to the box `[-n, n]^d`.
#[derive(Clone, Debug)]
pub struct ProductBoxSampler {
    pub measure: Arc<FugacityMeasure>,
    pub n: i64,
    pub d: usize,
}

impl ConfigSampler for ProductBoxSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration {
        self.measure.sample_box_config(self.n, self.d, rng)
    }
}

/// `mu_phi` on every site of a torus.
#[derive(Clone, Debug)]
pub struct TorusProductSampler {
    pub measure: Arc<FugacityMeasure>,
    pub torus: Torus,
}

impl ConfigSampler for TorusProductSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration {
        Configuration::from_pairs(
            self.torus.d,
            self.torus
                .sites()
                .into_iter()
                .map(|x| (x, self.measure.sample_marginal(rng.gen::<f64>()) as u32)),
        )
    }
}

/// `[mu]_n`: samples of the inner sampler with everything outside
/// `[-n, n]^d` set to zero.
pub struct Restricted<S> {
    pub inner: S,
    pub n: i64,
}

impl<S: ConfigSampler> ConfigSampler for Restricted<S> {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration {
        self.inner.sample(rng).truncate(self.n)
    }
}

pub fn restrict_measure<S: ConfigSampler>(sampler: S, n: i64) -> Restricted<S> {
    Restricted { inner: sampler, n }
}

/// Exact law of the torus conditioned on `N` particles: `prod_x w(eta(x))`,
/// normalized over `{sum eta = N}`.
#[derive(Clone, Debug)]
pub struct CanonicalTorusMeasure {
    pub torus: Torus,
    pub particles: u32,
    /// Occupancies in the order of `torus.sites()`; lexicographic enumeration.
    pub states: Vec<Vec<u32>>,
    pub probs: Vec<f64>,
}

/// `C(n, k)` as `u64`.
pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// All `m`-part compositions of `n`, lexicographically (first coordinate
/// largest first).
pub fn compositions(n: u32, m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; m];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    if m == 0 {
        return out;
    }
    rec(0, n, &mut cur, &mut out);
    out
}

pub fn canonical_torus_measure(
    rate: &RateFn,
    torus: Torus,
    particles: u32,
) -> Result<CanonicalTorusMeasure, MeasureError> {
    let m = torus.volume();
    if m > 5 || particles > 6 {
        return Err(MeasureError::StateSpaceTooLarge { sites: m, particles });
    }
    let mut log_w = vec![0.0; particles as usize + 1];
    for k in 1..=particles as usize {
        log_w[k] = log_w[k - 1] - rate.log_g(k as u64)?;
    }
    let states = compositions(particles, m);
    let logs: Vec<f64> = states.iter().map(|s| s.iter().map(|&k| log_w[k as usize]).sum()).collect();
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let un: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = un.iter().sum();
    let probs = un.into_iter().map(|u| u / z).collect();
    Ok(CanonicalTorusMeasure { torus, particles, states, probs })
}

impl CanonicalTorusMeasure {
    pub fn configuration(&self, state: usize) -> Configuration {
        Configuration::from_pairs(self.torus.d, self.torus.sites().into_iter().zip(self.states[state].iter().copied()))
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        let occ: Vec<u32> = self.torus.sites().into_iter().map(|x| c.get(x)).collect();
        self.states.iter().position(|s| *s == occ)
    }
}

impl ConfigSampler for CanonicalTorusMeasure {
    fn sample(&self, rng: &mut dyn RngCore) -> Configuration {
        let u = rng.gen::<f64>();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.configuration(i);
            }
        }
        self.configuration(self.probs.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn factorial(k: u64) -> f64 {
        (1..=k).map(|j| j as f64).product()
    }

    #[test]
    fn poisson_partition() {
        let p = partition_function(&RateFn::linear(), 2.0, 1e-14).unwrap();
        assert!((p.log_z - 2.0).abs() < 1e-13);
        assert!(p.tail_bound <= 1e-14);
    }

    #[test]
    fn tiny_fugacity() {
        let r = RateFn::power(2.0).unwrap();
        let p = partition_function(&r, 1e-12, 1e-14).unwrap();
        assert!((p.log_z - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn squared_factorial_series() {
        // Oracle: direct partial sums of 1/(k!)^2 and k/(k!)^2 up to k = 50.
        let z: f64 = (0..=50).map(|k| 1.0 / factorial(k).powi(2)).sum();
        let m: f64 = (0..=50).map(|k| k as f64 / factorial(k).powi(2)).sum();
        // Tabulated I0(2) = 2.2795853023360673.
        assert!((z - 2.279_585_302_336_067).abs() < 1e-14, "I0(2) sanity: {z}");
        let mu = FugacityMeasure::new(&RateFn::power(2.0).unwrap(), 1.0).unwrap();
        assert!((mu.partition().log_z - z.ln()).abs() < 1e-13);
        assert!((mu.density() - m / z).abs() < 1e-13);
    }

    #[test]
    fn poisson_density_and_pmf() {
        let mu = FugacityMeasure::new(&RateFn::linear(), 2.0).unwrap();
        assert!((mu.density() - 2.0).abs() < 1e-12);
        for k in 0..=20 {
            let exact = (-2.0f64).exp() * 2f64.powi(k as i32) / factorial(k);
            assert!((mu.pmf(k as usize) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn density_vanishes_monotonically_at_zero() {
        let r = RateFn::power(2.0).unwrap();
        let mut prev = f64::INFINITY;
        for phi in [1.0, 0.1, 0.01, 1e-4, 1e-8] {
            let d = FugacityMeasure::new(&r, phi).unwrap().density();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn fugacity_identity_examples() {
        let sq = RateFn::power(2.0).unwrap();
        for (r, phi) in [(&sq, 3.0), (&RateFn::linear(), 0.5), (&sq, 1e-8)] {
            let e = FugacityMeasure::new(r, phi).unwrap().fugacity_identity();
            assert!((e - phi).abs() < 1e-11, "{phi}: {e}");
        }
    }

    #[test]
    fn sample_marginal_examples() {
        let mu = FugacityMeasure::new(&RateFn::linear(), 1.0).unwrap();
        assert_eq!(mu.sample_marginal(0.0), 0);
        assert_eq!(mu.sample_marginal(0.3), 0);
        assert_eq!(mu.sample_marginal(0.9), 2);
        assert_eq!(mu.sample_marginal(1.0 - 1e-15), mu.k_trunc());
    }

    #[test]
    fn bounded_table_cannot_certify() {
        let t = RateFn::table(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(partition_function(&t, 5.0, 1e-12).unwrap_err(), MeasureError::CannotCertifyTail(3));
    }

    #[test]
    fn restriction_zeroes_outside() {
        let mu = Arc::new(FugacityMeasure::new(&RateFn::linear(), 3.0).unwrap());
        let s = restrict_measure(ProductBoxSampler { measure: mu, n: 5, d: 1 }, 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c = s.sample(&mut rng);
            assert!(c.iter().all(|(x, _)| x.norm_max() == 0));
        }
    }

    #[test]
    fn canonical_examples() {
        let two = Torus::with_side(2, 1);
        let c = canonical_torus_measure(&RateFn::power(2.0).unwrap(), two, 1).unwrap();
        assert_eq!(c.probs.len(), 2);
        assert!((c.probs[0] - 0.5).abs() < 1e-15);

        let c = canonical_torus_measure(&RateFn::power(2.0).unwrap(), two, 2).unwrap();
        // states (2,0), (1,1), (0,2)
        assert_eq!(c.states, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert!((c.probs[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.probs[1] - 4.0 / 6.0).abs() < 1e-15);
        assert!((c.probs[2] - 1.0 / 6.0).abs() < 1e-15);

        let c = canonical_torus_measure(&RateFn::linear(), Torus::with_side(3, 1), 3).unwrap();
        assert_eq!(c.states.len(), 10);
        assert_eq!(binomial(5, 3), 10);
        assert!((c.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(matches!(
            canonical_torus_measure(&RateFn::linear(), Torus::centered(3, 1), 2),
            Err(MeasureError::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn json_and_csv() {
        let mu = FugacityMeasure::new(&RateFn::linear(), 1.0).unwrap();
        let js = serde_json::to_value(mu.to_json()).unwrap();
        assert_eq!(js["phi"], 1.0);
        let mut buf = Vec::new();
        mu.write_marginal_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,p_k\n0,"));
        assert_eq!(s.lines().count(), mu.k_trunc() as usize + 2);
    }
}
