//! Non-decreasing jump-rate functions `g` and the increment envelope `h`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Kernel;

/// Values of `g` above this are treated as out of range (about `e^700`).
pub const LOG_RATE_LIMIT: f64 = 700.0;

/// Number of `g` / `h` values filled at construction.
const CACHE_LEN: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("g({0}) exceeds the representable range")]
    Overflow(u64),
    #[error("g({0}) is beyond the end of the rate table")]
    TableExhausted(u64),
    #[error("rate table must start with g(0) = 0, found {0}")]
    NonZeroOrigin(f64),
    #[error("rate table is not non-decreasing at index {0}: g({0}) = {1} is below the previous value {2}")]
    NotMonotone(usize, f64, f64),
    #[error("rate table entry {0} is negative or not finite")]
    BadValue(usize),
    #[error("rate table must have at least two entries")]
    TooShort,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// JSON form: `{"family":"power","a":2.0}`, `{"family":"table","values":[0,1,4,9]}`,
/// `{"family":"exp","c":1.0,"theta":0.5}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RateSpec {
    Power {
        a: f64,
        #[serde(default = "one")]
        c: f64,
    },
    Exp {
        c: f64,
        theta: f64,
    },
    Table {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone)]
enum Family {
    /// `g(k) = c k^a`
    Power { a: f64, c: f64 },
    /// `g(0) = 0`, `g(k) = c e^{theta k}` for `k >= 1`
    Exp { c: f64, theta: f64 },
    Table(Vec<f64>),
    Custom { name: String, f: Arc<dyn Fn(u64) -> f64 + Send + Sync> },
}

/// A rate function with `g(0) = 0`, non-decreasing and unbounded on its domain.
#[derive(Clone)]
pub struct RateFn {
    family: Family,
    g_cache: Arc<[f64]>,
    h_cache: Arc<[f64]>,
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Power { a, c } => write!(f, "RateFn::Power(a={a}, c={c})"),
            Family::Exp { c, theta } => write!(f, "RateFn::Exp(c={c}, theta={theta})"),
            Family::Table(v) => write!(f, "RateFn::Table(len={})", v.len()),
            Family::Custom { name, .. } => write!(f, "RateFn::Custom({name})"),
        }
    }
}

impl RateFn {
    pub fn power(a: f64) -> Result<Self, RateError> {
        Self::scaled_power(a, 1.0)
    }

    pub fn scaled_power(a: f64, c: f64) -> Result<Self, RateError> {
        if !(a > 0.0 && a.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(RateError::Parameter(format!("power family needs a > 0, c > 0 (a={a}, c={c})")));
        }
        Ok(Self::build(Family::Power { a, c }))
    }

    /// `g(k) = k`: independent particles.
    pub fn linear() -> Self {
        Self::build(Family::Power { a: 1.0, c: 1.0 })
    }

    pub fn exponential(c: f64, theta: f64) -> Result<Self, RateError> {
        if !(c > 0.0 && c.is_finite()) || !(theta > 0.0 && theta.is_finite()) {
            return Err(RateError::Parameter(format!("exp family needs c > 0, theta > 0 (c={c}, theta={theta})")));
        }
        Ok(Self::build(Family::Exp { c, theta }))
    }

    pub fn table(values: Vec<f64>) -> Result<Self, RateError> {
        if values.len() < 2 {
            return Err(RateError::TooShort);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(RateError::BadValue(i));
            }
        }
        if values[0] != 0.0 {
            return Err(RateError::NonZeroOrigin(values[0]));
        }
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                return Err(RateError::NotMonotone(i, values[i], values[i - 1]));
            }
        }
        if values.iter().any(|v| v.ln() > LOG_RATE_LIMIT) {
            let i = values.iter().position(|v| v.ln() > LOG_RATE_LIMIT).unwrap();
            return Err(RateError::Overflow(i as u64));
        }
        Ok(Self::build(Family::Table(values)))
    }

    /// Arbitrary formula. The caller vouches for `g(0) = 0` and monotonicity;
    /// both are checked over the cached prefix.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, RateError> {
        let r = Self::build(Family::Custom { name: name.into(), f: Arc::new(f) });
        if r.g_cache.is_empty() || r.g_cache[0] != 0.0 {
            return Err(RateError::NonZeroOrigin(r.g_cache.first().copied().unwrap_or(f64::NAN)));
        }
        for i in 1..r.g_cache.len() {
            if r.g_cache[i] < r.g_cache[i - 1] {
                return Err(RateError::NotMonotone(i, r.g_cache[i], r.g_cache[i - 1]));
            }
        }
        Ok(r)
    }

    pub fn from_spec(spec: &RateSpec) -> Result<Self, RateError> {
        match spec {
            RateSpec::Power { a, c } => Self::scaled_power(*a, *c),
            RateSpec::Exp { c, theta } => Self::exponential(*c, *theta),
            RateSpec::Table { values } => Self::table(values.clone()),
        }
    }

    /// `None` for custom formulas, which have no JSON form.
    pub fn to_spec(&self) -> Option<RateSpec> {
        match &self.family {
            Family::Power { a, c } => Some(RateSpec::Power { a: *a, c: *c }),
            Family::Exp { c, theta } => Some(RateSpec::Exp { c: *c, theta: *theta }),
            Family::Table(v) => Some(RateSpec::Table { values: v.clone() }),
            Family::Custom { .. } => None,
        }
    }

    fn build(family: Family) -> Self {
        let mut g = Vec::with_capacity(CACHE_LEN);
        for k in 0..CACHE_LEN as u64 {
            match eval(&family, k) {
                Ok(v) => g.push(v),
                Err(_) => break,
            }
        }
        let mut h = Vec::with_capacity(g.len());
        let mut best = 0.0f64;
        h.push(0.0);
        for k in 1..g.len() {
            best = best.max(g[k] - g[k - 1]);
            h.push(best);
        }
        RateFn { family, g_cache: g.into(), h_cache: h.into() }
    }

    /// `g(k)`, or a range error past `e^700` / the end of a table.
    pub fn g(&self, k: u64) -> Result<f64, RateError> {
        match self.g_cache.get(k as usize) {
            Some(v) => Ok(*v),
            None => eval(&self.family, k),
        }
    }

    /// `log g(k)` for `k >= 1`, evaluated without forming `g(k)` where possible.
    pub fn log_g(&self, k: u64) -> Result<f64, RateError> {
        match &self.family {
            Family::Power { a, c } => Ok(c.ln() + a * (k as f64).ln()),
            Family::Exp { c, theta } if k >= 1 => Ok(c.ln() + theta * k as f64),
            _ => self.g(k).map(f64::ln),
        }
    }

    /// Largest `k` for which `g(k)` is representable, if bounded.
    pub fn max_index(&self) -> Option<u64> {
        match &self.family {
            Family::Power { a, c } => {
                let k = ((LOG_RATE_LIMIT - c.ln()) / a).exp();
                (k < 1e15).then(|| k.floor() as u64)
            }
            Family::Exp { c, theta } => Some(((LOG_RATE_LIMIT - c.ln()) / theta).floor().max(0.0) as u64),
            Family::Table(v) => Some(v.len() as u64 - 1),
            Family::Custom { .. } => None,
        }
    }

    /// `h(n) = sup_{1 <= j <= n} (g(j) - g(j-1))`.
    pub fn h(&self, n: u64) -> Result<f64, RateError> {
        if n == 0 {
            return Err(RateError::Parameter("h(n) needs n >= 1".into()));
        }
        if let Some(v) = self.h_cache.get(n as usize) {
            return Ok(*v);
        }
        let start = self.h_cache.len() as u64;
        let mut best = *self.h_cache.last().unwrap_or(&0.0);
        let mut prev = self.g(start - 1)?;
        for j in start..=n {
            let cur = self.g(j)?;
            best = best.max(cur - prev);
            prev = cur;
        }
        Ok(best)
    }

    /// Whether `g(n) <= c e^{theta n}` for every `0 <= n <= n_max`.
    pub fn check_exponential_bound(&self, c: f64, theta: f64, n_max: u64) -> bool {
        let ln_c = c.ln();
        (1..=n_max).all(|n| match self.log_g(n) {
            Ok(lg) => lg <= ln_c + theta * n as f64 + 1e-12 * lg.abs().max(1.0),
            Err(_) => false,
        })
    }

    pub fn check_corollary_conditions(
        &self,
        kernel: &Kernel,
        n_max: u64,
        fit_window: usize,
    ) -> Result<CorollaryReport, RateError> {
        check_corollary_conditions(self, kernel, n_max, fit_window)
    }
}

fn eval(family: &Family, k: u64) -> Result<f64, RateError> {
    let v = match family {
        Family::Power { a, c } => {
            if k == 0 {
                return Ok(0.0);
            }
            let lg = c.ln() + a * (k as f64).ln();
            if lg > LOG_RATE_LIMIT {
                return Err(RateError::Overflow(k));
            }
            c * (k as f64).powf(*a)
        }
        Family::Exp { c, theta } => {
            if k == 0 {
                return Ok(0.0);
            }
            let lg = c.ln() + theta * k as f64;
            if lg > LOG_RATE_LIMIT {
                return Err(RateError::Overflow(k));
            }
            lg.exp()
        }
        Family::Table(values) => *values.get(k as usize).ok_or(RateError::TableExhausted(k))?,
        Family::Custom { f, .. } => f(k),
    };
    if !v.is_finite() || v.ln() > LOG_RATE_LIMIT {
        return Err(RateError::Overflow(k));
    }
    Ok(v)
}

/// Margin below `2/d` required of the fitted growth exponent of `h`.
pub const EXPONENT_MARGIN: f64 = 0.05;

/// Finite-range evidence for the growth conditions on `h`. The asymptotic
/// statements cannot be decided from finitely many values, so `heuristic`
/// is always set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CorollaryReport {
    pub a_estimate: f64,
    pub condition_a: bool,
    pub condition_b: bool,
    pub mean_zero: bool,
    /// `n_max` actually used, after clamping to the representable range.
    pub n_max: u64,
    pub grid: Vec<u64>,
    pub heuristic: bool,
}

/// Evaluation grid: `fit_window` geometrically spaced integers in
/// `[sqrt(n_max), n_max]`, deduplicated.
fn fit_grid(n_max: u64, fit_window: usize) -> Vec<u64> {
    let lo = (n_max as f64).sqrt().ceil().max(1.0);
    let hi = n_max as f64;
    let mut grid: Vec<u64> = (0..fit_window)
        .map(|i| {
            let s = if fit_window == 1 { 1.0 } else { i as f64 / (fit_window - 1) as f64 };
            (lo.ln() + s * (hi.ln() - lo.ln())).exp().round() as u64
        })
        .collect();
    grid.dedup();
    grid
}

pub fn check_corollary_conditions(
    rate: &RateFn,
    kernel: &Kernel,
    n_max: u64,
    fit_window: usize,
) -> Result<CorollaryReport, RateError> {
    if fit_window < 10 || (n_max as usize) < fit_window {
        return Err(RateError::Parameter(format!(
            "need n_max >= fit_window >= 10 (n_max={n_max}, fit_window={fit_window})"
        )));
    }
    let n_eff = match rate.max_index() {
        Some(m) => n_max.min(m),
        None => n_max,
    };
    if (n_eff as usize) < fit_window {
        return Err(RateError::Parameter(format!("only {n_eff} representable rate values")));
    }
    let grid = fit_grid(n_eff, fit_window);
    let d = kernel.dim() as f64;
    let hs = grid.iter().map(|&n| rate.h(n)).collect::<Result<Vec<_>, _>>()?;

    let xs: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = hs.iter().map(|h| h.max(f64::MIN_POSITIVE).ln()).collect();
    let a_estimate = ls_slope(&xs, &ys);
    let mean_zero = kernel.is_mean_zero();
    let condition_a = mean_zero && a_estimate < 2.0 / d - EXPONENT_MARGIN;

    let scaled: Vec<f64> = grid.iter().zip(&hs).map(|(&n, h)| h * (n as f64).powf(-1.0 / d)).collect();
    let decreasing = scaled.windows(2).all(|w| w[1] <= w[0]);
    let condition_b = decreasing && scaled[scaled.len() - 1] < scaled[0] / 2.0;

    Ok(CorollaryReport {
        a_estimate,
        condition_a,
        condition_b,
        mean_zero,
        n_max: n_eff,
        grid,
        heuristic: true,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn h_examples() {
        assert_eq!(RateFn::linear().h(100).unwrap(), 1.0);
        assert_eq!(RateFn::power(2.0).unwrap().h(5).unwrap(), 9.0);
        let t = RateFn::table(vec![0.0, 2.0, 2.5, 10.0]).unwrap();
        assert_eq!(t.h(3).unwrap(), 7.5);
        assert_eq!(t.h(4), Err(RateError::TableExhausted(4)));
        assert!(RateFn::linear().h(0).is_err());
    }

    #[test]
    fn h_beyond_cache_matches_scan() {
        let r = RateFn::power(1.5).unwrap();
        let n = CACHE_LEN as u64 + 500;
        let direct = (n as f64).powf(1.5) - ((n - 1) as f64).powf(1.5);
        assert!((r.h(n).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn exponential_bound_examples() {
        assert!(RateFn::power(2.0).unwrap().check_exponential_bound(1.0, 1.0, 1000));
        let vals: Vec<f64> = (0..=10).map(|k| (2.0 * k as f64).exp() - 1.0).collect();
        let t = RateFn::table(vals).unwrap();
        assert!(!t.check_exponential_bound(1.0, 1.0, 10));
        assert!(t.check_exponential_bound(1.0, 1.0, 0));
    }

    #[test]
    fn corollary_power_1_2() {
        let r = RateFn::power(1.2).unwrap();
        let k = Kernel::nearest_neighbour(0.5).unwrap();
        let rep = r.check_corollary_conditions(&k, 10_000, 50).unwrap();
        assert!((0.15..=0.25).contains(&rep.a_estimate), "{}", rep.a_estimate);
        assert!(rep.condition_a);
        assert!(rep.heuristic);
    }

    #[test]
    fn corollary_linear_and_exponential() {
        let k = Kernel::nearest_neighbour(0.7).unwrap();
        let rep = RateFn::linear().check_corollary_conditions(&k, 10_000, 50).unwrap();
        assert!(rep.condition_b);
        assert!(!rep.condition_a, "drift is non-zero");

        let vals: Vec<f64> = (0..=600).map(|k| if k == 0 { 0.0 } else { (k as f64).exp() }).collect();
        let e = RateFn::table(vals).unwrap();
        let sym = Kernel::nearest_neighbour(0.5).unwrap();
        let rep = e.check_corollary_conditions(&sym, 10_000, 50).unwrap();
        assert_eq!(rep.n_max, 600);
        assert!(!rep.condition_a && !rep.condition_b);
    }

    #[test]
    fn table_validation_names_index() {
        let err = RateFn::table(vec![0.0, 1.0, 3.0, 2.0]).unwrap_err();
        assert_eq!(err, RateError::NotMonotone(3, 2.0, 3.0));
        assert!(err.to_string().contains("index 3"));
        assert_eq!(RateFn::table(vec![1.0, 2.0]).unwrap_err(), RateError::NonZeroOrigin(1.0));
    }

    #[test]
    fn overflow_guard() {
        let e = RateFn::exponential(1.0, 1.0).unwrap();
        assert!(e.g(700).is_ok());
        assert_eq!(e.g(701), Err(RateError::Overflow(701)));
        assert_eq!(e.max_index(), Some(700));
    }

    #[test]
    fn spec_json_round_trip() {
        for s in [
            r#"{"family":"power","a":2.0}"#,
            r#"{"family":"table","values":[0,1,4,9]}"#,
            r#"{"family":"exp","c":1.0,"theta":0.5}"#,
        ] {
            let spec: RateSpec = serde_json::from_str(s).unwrap();
            let r = RateFn::from_spec(&spec).unwrap();
            assert_eq!(r.to_spec().unwrap(), spec);
        }
    }

    proptest! {
        #[test]
        fn h_envelope(a in 0.2f64..3.0, n in 1u64..3000) {
            let r = RateFn::power(a).unwrap();
            let hn = r.h(n).unwrap();
            prop_assert!(r.h(n + 1).unwrap() >= hn);
            prop_assert!(r.g(n).unwrap() - r.g(n - 1).unwrap() <= hn);
            if a >= 1.0 {
                let inc = r.g(n).unwrap() - r.g(n - 1).unwrap();
                prop_assert!((hn - inc).abs() <= 1e-9 * hn.max(1.0));
            }
        }

        #[test]
        fn table_h_is_running_max(incs in proptest::collection::vec(0.0f64..10.0, 2..40)) {
            let mut vals = vec![0.0];
            for i in &incs {
                let last = *vals.last().unwrap();
                vals.push(last + i);
            }
            let r = RateFn::table(vals.clone()).unwrap();
            for n in 1..vals.len() as u64 {
                let brute = (1..=n as usize).map(|j| vals[j] - vals[j - 1]).fold(0.0, f64::max);
                prop_assert_eq!(r.h(n).unwrap(), brute);
            }
        }
    }
}
