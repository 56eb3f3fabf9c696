use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use super::curve::{check_site, estimate_f};
use super::enumerate::{enumerate_particles, Enumeration};
use super::exact::{exact_f_small, max_radius};
use super::HittingError;
use crate::config::Configuration;
use crate::lattice::{Kernel, Site};
use crate::noise::derive_seed;
use crate::rates::RateFn;

/// Factor applied to the empirical maximum in [`calibrate_doob`].
pub const DOOB_INFLATION: f64 = 2.0;

const DOOB_TIMES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Bound used for the particles past the cutoff.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TailMethod {
    /// `F_x(s) <= C s^{p/2} / |x|^p` for mean-zero kernels. `constant: None`
    /// calibrates `C` with [`calibrate_doob`].
    Doob { p: f64, constant: Option<f64> },
    /// `F_x(s) <= P(Gamma(m, 1) <= s)`, `m = ceil(|x| / R)` the fewest jumps
    /// of a range-`R` kernel that can cover `|x|`.
    ExpSum,
    None,
}

impl TailMethod {
    fn name(&self) -> &'static str {
        match self {
            TailMethod::Doob { .. } => "doob",
            TailMethod::ExpSum => "exp-sum",
            TailMethod::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MbarOptions {
    /// Terms `i <= cutoff` are evaluated individually.
    pub cutoff: usize,
    pub tail: TailMethod,
    /// Walks per term when no exact solve applies.
    pub mc_replicas: usize,
    pub seed: u64,
    /// Continue the tail past the last particle up to this index, placing
    /// particle `i` at distance `ceil(c i^{1/d})` with the fitted `c`.
    pub extend_to: Option<usize>,
}

impl Default for MbarOptions {
    fn default() -> Self {
        MbarOptions { cutoff: usize::MAX, tail: TailMethod::None, mc_replicas: 20_000, seed: 0, extend_to: None }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TermMethod {
    Trivial,
    ExactAbsorbing,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MbarTerm {
    pub i: usize,
    pub site: Vec<i64>,
    pub h: f64,
    /// `h(i) t`
    pub time: f64,
    /// Upper end of the bracket (exact) or of the Wilson interval (Monte Carlo).
    pub value: f64,
    pub method: TermMethod,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MbarReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub t: f64,
    pub particles: usize,
    pub partial: f64,
    pub tail: f64,
    pub total: f64,
    pub tail_method: String,
    pub flags: Vec<String>,
    pub fitted_c: Option<f64>,
    pub doob_constant: Option<f64>,
    pub terms: Vec<MbarTerm>,
}

/// One `F_x(s)` upper value, exact where the box solve applies.
fn term_upper(kernel: &Kernel, x: Site, s: f64, replicas: usize, seed: u64) -> Result<(f64, TermMethod), HittingError> {
    if x == Site::ORIGIN {
        return Ok((1.0, TermMethod::Trivial));
    }
    if s == 0.0 {
        return Ok((0.0, TermMethod::Trivial));
    }
    if let Some(r) = max_radius(kernel.dim()) {
        if x.norm_max() < r {
            return Ok((exact_f_small(kernel, x, s, r)?.upper, TermMethod::ExactAbsorbing));
        }
    }
    let c = estimate_f(kernel, x, &[s], replicas, seed)?;
    Ok((c.points[0].ci_high, TermMethod::MonteCarlo))
}

/// `C'_p`: twice the largest `|x|^p F_x(t) / t^{p/2}` over `t in {1,2,4,8}`
/// and probe points along the axes and diagonals, `F` taken from the upper end
/// of [`exact_f_small`]. An empirical constant, not a proven one.
pub fn calibrate_doob(kernel: &Kernel, p: f64) -> Result<f64, HittingError> {
    if !kernel.is_mean_zero() {
        return Err(HittingError::Drift(kernel.mean_drift()));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(HittingError::Invalid(format!("doob exponent must be positive, got {p}")));
    }
    let d = kernel.dim();
    let r = max_radius(d).ok_or(HittingError::Dimension(d))?;
    let reach = (r - 1).min(10);
    let mut directions: Vec<Vec<i64>> = Vec::new();
    for i in 0..d {
        for s in [-1, 1] {
            let mut v = vec![0; d];
            v[i] = s;
            directions.push(v);
        }
    }
    if d == 2 {
        directions.extend([vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]]);
    }
    let mut best = 0.0f64;
    for dir in &directions {
        for j in 1..=reach {
            let x = Site::from_coords(&dir.iter().map(|c| c * j).collect::<Vec<_>>()).expect("d <= 2");
            for &t in &DOOB_TIMES {
                let f = exact_f_small(kernel, x, t, r)?.upper;
                best = best.max((j as f64).powf(p) * f / t.powf(p / 2.0));
            }
        }
    }
    Ok(DOOB_INFLATION * best)
}

/// `mbar_z(t, eta) = sum_i F_{x^i - z}(h(i) t)` over the enumeration of `eta`
/// around `z`: terms up to the cutoff individually, the rest through the
/// chosen tail bound.
pub fn mbar(
    eta: &Configuration,
    z: Site,
    t: f64,
    rate: &RateFn,
    kernel: &Kernel,
    opts: &MbarOptions,
) -> Result<MbarReport, HittingError> {
    check_site(kernel, z)?;
    if eta.dim() != kernel.dim() {
        return Err(HittingError::Invalid(format!("configuration has d = {}, kernel d = {}", eta.dim(), kernel.dim())));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(HittingError::Invalid(format!("time must be finite and non-negative, got {t}")));
    }
    let e: Enumeration = enumerate_particles(eta, z);
    let d = kernel.dim();
    let mut flags = Vec::new();
    let doob_constant = match opts.tail {
        TailMethod::Doob { p, constant } => {
            if !kernel.is_mean_zero() {
                return Err(HittingError::Drift(kernel.mean_drift()));
            }
            flags.push("calibrated".to_string());
            Some(match constant {
                Some(c) => c,
                None => calibrate_doob(kernel, p)?,
            })
        }
        _ => None,
    };

    let head = e.len().min(opts.cutoff);
    let mut terms = Vec::with_capacity(head);
    for (i, coords) in e.sites.iter().take(head).enumerate() {
        let x = Site::from_coords(coords).expect("enumerated site").sub(z);
        let h = rate.h(i as u64 + 1)?;
        let (value, method) = term_upper(kernel, x, h * t, opts.mc_replicas, derive_seed(opts.seed, i as u64))?;
        terms.push(MbarTerm { i: i + 1, site: coords.clone(), h, time: h * t, value, method });
    }
    if terms.iter().any(|m| m.method == TermMethod::ExactAbsorbing) {
        flags.push("upper-bracket".to_string());
    }
    if terms.iter().any(|m| m.method == TermMethod::MonteCarlo) {
        flags.push("monte-carlo".to_string());
    }
    let partial: f64 = terms.iter().map(|m| m.value).sum();

    // Distances of the tail particles: enumerated ones first, then the
    // fitted envelope up to `extend_to`.
    let mut tail_dist: Vec<(usize, f64)> = (head..e.len()).map(|i| (i + 1, e.distances[i] as f64)).collect();
    if let Some(n) = opts.extend_to.filter(|&n| n > e.len()) {
        let c = e.fitted_c.unwrap_or(0.0);
        tail_dist.extend((e.len().max(head)..n).map(|i| (i + 1, (c * ((i + 1) as f64).powf(1.0 / d as f64)).ceil())));
        flags.push("extrapolated".to_string());
    }
    let range = kernel.range() as f64;
    let mut tail = 0.0;
    for &(i, dist) in &tail_dist {
        let s = rate.h(i as u64)? * t;
        let term = if dist == 0.0 {
            1.0
        } else if s == 0.0 {
            0.0
        } else {
            match opts.tail {
                TailMethod::Doob { p, .. } => (doob_constant.expect("set above") * s.powf(p / 2.0) / dist.powf(p)).min(1.0),
                TailMethod::ExpSum => gamma_lr((dist / range).ceil(), s),
                TailMethod::None => 0.0,
            }
        };
        tail += term;
    }
    if matches!(opts.tail, TailMethod::None) && !tail_dist.is_empty() {
        flags.push("tail-omitted".to_string());
    }
    Ok(MbarReport {
        k: opts.cutoff.min(e.len()),
        t,
        particles: e.len(),
        partial,
        tail,
        total: partial + tail,
        tail_method: opts.tail.name().to_string(),
        flags,
        fitted_c: e.fitted_c,
        doob_constant,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `E[min(N, k)]` for `N ~ Poisson(t)` by direct summation of the PMF.
    fn truncated_poisson_mean(t: f64, k: u64) -> f64 {
        let mut pmf = (-t).exp();
        let mut acc = 0.0;
        for n in 0..400u64 {
            if n > 0 {
                pmf *= t / n as f64;
            }
            acc += n.min(k) as f64 * pmf;
        }
        acc
    }

    fn left_line(k: i64) -> Configuration {
        Configuration::d1(&(1..=k).map(|j| (-j, 1)).collect::<Vec<_>>())
    }

    #[test]
    fn poisson_oracle() {
        let k = Kernel::nearest_neighbour(1.0).unwrap();
        let r = mbar(&left_line(10), Site::ORIGIN, 1.0, &RateFn::linear(), &k, &MbarOptions::default()).unwrap();
        let oracle = truncated_poisson_mean(1.0, 10);
        assert!((oracle - 0.999_999_989_052_185_4).abs() < 1e-15);
        assert!((r.partial - oracle).abs() < 1e-10, "{} vs {oracle}", r.partial);
        assert_eq!((r.tail, r.k, r.particles), (0.0, 10, 10));
    }

    #[test]
    fn single_particle_is_one_curve_value() {
        let k = Kernel::nearest_neighbour(0.3).unwrap();
        let rate = RateFn::power(2.0).unwrap();
        let eta = Configuration::d1(&[(3, 1)]);
        let r = mbar(&eta, Site::d1(1), 0.7, &rate, &k, &MbarOptions::default()).unwrap();
        let f = exact_f_small(&k, Site::d1(2), rate.g(1).unwrap() * 0.7, 30).unwrap().upper;
        assert_eq!(r.total, f);
    }

    #[test]
    fn exp_sum_tail_is_finite_and_small() {
        let k = Kernel::nearest_neighbour(1.0).unwrap();
        let eta = Configuration::d1(&(-200..=200).map(|x| (x, 1)).collect::<Vec<_>>());
        let opts = MbarOptions { cutoff: 20, tail: TailMethod::ExpSum, extend_to: Some(5000), ..Default::default() };
        let r = mbar(&eta, Site::ORIGIN, 1.0, &RateFn::linear(), &k, &opts).unwrap();
        assert!(r.tail.is_finite() && r.tail < 1e-3, "{r:?}");
        assert!(r.flags.contains(&"extrapolated".to_string()));
        // The gamma bound dominates the exact term for a particle it covers.
        let exact = exact_f_small(&k, Site::d1(-3), 1.0, 30).unwrap().upper;
        assert!(exact <= gamma_lr(3.0, 1.0) + 1e-12);
    }

    #[test]
    fn doob_needs_zero_drift() {
        let k = Kernel::nearest_neighbour(0.7).unwrap();
        let opts = MbarOptions { cutoff: 0, tail: TailMethod::Doob { p: 2.0, constant: None }, ..Default::default() };
        let e = mbar(&Configuration::d1(&[(4, 1)]), Site::ORIGIN, 1.0, &RateFn::linear(), &k, &opts);
        assert!(matches!(e, Err(HittingError::Drift(_))));
    }

    #[test]
    fn doob_tail_dominates_exact_terms() {
        let k = Kernel::nearest_neighbour(0.5).unwrap();
        let c = calibrate_doob(&k, 2.0).unwrap();
        assert!(c > 0.0 && c.is_finite());
        let eta = Configuration::d1(&[(-4, 1), (6, 2), (9, 1)]);
        let rate = RateFn::linear();
        let exact = mbar(&eta, Site::ORIGIN, 2.0, &rate, &k, &MbarOptions::default()).unwrap();
        let opts = MbarOptions { cutoff: 0, tail: TailMethod::Doob { p: 2.0, constant: Some(c) }, ..Default::default() };
        let doob = mbar(&eta, Site::ORIGIN, 2.0, &rate, &k, &opts).unwrap();
        assert!(doob.total >= exact.total, "{} < {}", doob.total, exact.total);
        assert!(doob.flags.contains(&"calibrated".to_string()));
    }

    #[test]
    fn monte_carlo_fallback_far_away() {
        let k = Kernel::nearest_neighbour(1.0).unwrap();
        let eta = Configuration::d1(&[(-40, 1)]);
        let r = mbar(&eta, Site::ORIGIN, 1.0, &RateFn::linear(), &k, &MbarOptions::default()).unwrap();
        assert_eq!(r.terms[0].method, TermMethod::MonteCarlo);
        assert!(r.total < 1e-3);
    }

    #[test]
    fn report_json_shape() {
        let k = Kernel::nearest_neighbour(1.0).unwrap();
        let r = mbar(&left_line(3), Site::ORIGIN, 1.0, &RateFn::linear(), &k, &MbarOptions::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["K", "partial", "tail", "total", "tail_method", "flags"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn small_config() -> impl Strategy<Value = Vec<(i64, u32)>> {
        prop::collection::vec((-6i64..=6, 1u32..=3), 0..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn monotone_in_time_and_configuration(
            base in small_config(),
            extra in (-6i64..=6),
            p in prop::sample::select(vec![0.5, 0.8, 1.0]),
            t in 0.1f64..2.0,
            dt in 0.0f64..1.0,
        ) {
            let k = Kernel::nearest_neighbour(p).unwrap();
            let rate = RateFn::power(2.0).unwrap();
            let opts = MbarOptions::default();
            let eta = Configuration::d1(&base);
            let m0 = mbar(&eta, Site::ORIGIN, t, &rate, &k, &opts).unwrap().total;
            let m1 = mbar(&eta, Site::ORIGIN, t + dt, &rate, &k, &opts).unwrap().total;
            prop_assert!(m1 >= m0 - 1e-12, "time: {m0} > {m1}");
            let mut more = eta.clone();
            more.add(Site::d1(extra), 1);
            let m2 = mbar(&more, Site::ORIGIN, t, &rate, &k, &opts).unwrap().total;
            prop_assert!(m2 >= m0 - 1e-12, "config: {m0} > {m2}");
        }
    }
}
