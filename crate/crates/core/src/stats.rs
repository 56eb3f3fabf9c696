//! Small statistics toolkit: means with standard errors, Wilson intervals,
//! chi-square tests with sparse-bin merging, and dispersion indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Minimum expected count per chi-square bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Summary { n, mean, var, se: (var / n as f64).sqrt() }
    }

    /// `|mean - target| <= k * se`, with an absolute slack for degenerate
    /// (zero-variance) samples.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Wilson score interval for `successes / n` at `z` standard deviations.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

impl ChiSquare {
    fn new(statistic: f64, bins: usize, constraints: usize) -> Self {
        let dof = bins.saturating_sub(constraints);
        let p_value = if dof == 0 {
            1.0
        } else {
            ChiSquared::new(dof as f64).map(|c| c.sf(statistic)).unwrap_or(f64::NAN)
        };
        ChiSquare { statistic, dof, p_value, bins }
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Merges consecutive bins (left to right) until each holds at least
/// `MIN_EXPECTED` by `weight`; a short remainder joins the last full bin.
fn merge_ordered(weights: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= MIN_EXPECTED {
            out.push(start..i + 1);
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match out.last_mut() {
            Some(last) => last.end = weights.len(),
            None => out.push(0..weights.len()),
        }
    }
    out
}

/// Goodness of fit of `observed` counts against category probabilities
/// `probs`. Observations beyond `probs.len()` count towards the last
/// category; sparse categories are merged in order.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquare {
    let n: u64 = observed.iter().sum();
    let mut obs = vec![0u64; probs.len()];
    for (i, &o) in observed.iter().enumerate() {
        obs[i.min(probs.len() - 1)] += o;
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let groups = merge_ordered(&expected);
    let mut stat = 0.0;
    for g in &groups {
        let e: f64 = expected[g.clone()].iter().sum();
        let o: u64 = obs[g.clone()].iter().sum();
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    ChiSquare::new(stat, groups.len(), 1)
}

/// Two-sample homogeneity test on ordered histograms (index = category).
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquare {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let frac = na.min(nb) / (na + nb);
    // Smaller sample's expected count drives the merge.
    let weights: Vec<f64> = (0..len).map(|i| (get(a, i) + get(b, i)) * frac).collect();
    let groups = merge_ordered(&weights);
    let cells: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| (g.clone().map(|i| get(a, i)).sum(), g.clone().map(|i| get(b, i)).sum()))
        .collect();
    homogeneity_stat(&cells, na, nb)
}

/// Two-sample homogeneity on categorical histograms keyed by arbitrary
/// ordered labels (e.g. joint occupancy vectors). Categories are merged in
/// key order.
pub fn chi_square_homogeneity_map<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> ChiSquare {
    let keys: Vec<K> = a.keys().chain(b.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let va: Vec<u64> = keys.iter().map(|k| a.get(k).copied().unwrap_or(0)).collect();
    let vb: Vec<u64> = keys.iter().map(|k| b.get(k).copied().unwrap_or(0)).collect();
    chi_square_homogeneity(&va, &vb)
}

fn homogeneity_stat(cells: &[(f64, f64)], na: f64, nb: f64) -> ChiSquare {
    let n = na + nb;
    let mut stat = 0.0;
    for &(oa, ob) in cells {
        let tot = oa + ob;
        if tot == 0.0 {
            continue;
        }
        let (ea, eb) = (tot * na / n, tot * nb / n);
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    ChiSquare::new(stat, cells.len(), 1)
}

/// Index of dispersion `var/mean` with its large-sample standard error
/// `sqrt(2/(n-1))` under a Poisson null.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Dispersion {
    pub index: f64,
    pub se: f64,
}

pub fn dispersion(xs: &[f64]) -> Dispersion {
    let s = Summary::of(xs);
    let index = if s.mean > 0.0 { s.var / s.mean } else { f64::NAN };
    Dispersion { index, se: (2.0 / (s.n.max(2) - 1) as f64).sqrt() }
}

/// Histogram of non-negative integer samples.
pub fn histogram(xs: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut h = Vec::new();
    for x in xs {
        let x = x as usize;
        if h.len() <= x {
            h.resize(x + 1, 0);
        }
        h[x] += 1;
    }
    h
}

/// `log(mean(exp(v)))` without overflow.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}
