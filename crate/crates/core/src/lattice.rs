//! Lattice sites and the translation-invariant, finite-range jump kernel.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest lattice dimension supported by [`Site`].
pub const MAX_DIM: usize = 4;

/// A point of `Z^d`, `d <= MAX_DIM`. Unused trailing coordinates are zero.
///
/// Ordering is lexicographic over the coordinates, which is the tie-break
/// order used everywhere in the crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub [i64; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    /// Site of `Z^1`.
    pub fn d1(x: i64) -> Self {
        let mut c = [0; MAX_DIM];
        c[0] = x;
        Site(c)
    }

    pub fn from_coords(coords: &[i64]) -> Result<Self, LatticeError> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(LatticeError::Dimension(coords.len()));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site(c))
    }

    pub fn coords(&self, d: usize) -> &[i64] {
        &self.0[..d]
    }

    pub fn offset(self, z: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(z.0) {
            *a += b;
        }
        Site(c)
    }

    pub fn neg(self) -> Site {
        Site(self.0.map(|a| -a))
    }

    pub fn sub(self, other: Site) -> Site {
        self.offset(other.neg())
    }

    /// Max-norm `max_i |x_i|`.
    pub fn norm_max(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn norm_l2(&self) -> f64 {
        self.0.iter().map(|&a| (a * a) as f64).sum::<f64>().sqrt()
    }

    /// Formats the first `d` coordinates joined by `;`.
    pub fn join(&self, d: usize) -> String {
        self.coords(d).iter().map(i64::to_string).collect::<Vec<_>>().join(";")
    }

    pub fn parse_joined(s: &str) -> Result<Site, LatticeError> {
        let coords = s
            .split(';')
            .map(|p| p.trim().parse::<i64>().map_err(|_| LatticeError::Parse(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Site::from_coords(&coords)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// All sites of the box `[-n, n]^d` in lexicographic order.
pub fn box_sites(n: i64, d: usize) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = [0i64; MAX_DIM];
    fn rec(level: usize, n: i64, d: usize, cur: &mut [i64; MAX_DIM], out: &mut Vec<Site>) {
        if level == d {
            out.push(Site(*cur));
            return;
        }
        for v in -n..=n {
            cur[level] = v;
            rec(level + 1, n, d, cur, out);
        }
        cur[level] = 0;
    }
    rec(0, n, d, &mut cur, &mut out);
    out
}

/// Torus `(Z / side Z)^d` with representative coordinates in
/// `[lo, lo + side - 1]`, `lo = -(side / 2)`. For `side = 2n + 1` this is the
/// box `[-n, n]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Torus {
    pub side: i64,
    pub d: usize,
}

impl Torus {
    /// Torus on the box `[-n, n]^d`.
    pub fn centered(n: i64, d: usize) -> Self {
        Torus { side: 2 * n + 1, d }
    }

    pub fn with_side(side: i64, d: usize) -> Self {
        assert!(side >= 1, "torus side must be positive");
        Torus { side, d }
    }

    pub fn lo(&self) -> i64 {
        -(self.side / 2)
    }

    pub fn volume(&self) -> usize {
        (self.side as usize).pow(self.d as u32)
    }

    pub fn contains(&self, x: Site) -> bool {
        let lo = self.lo();
        x.0[..self.d].iter().all(|&c| c >= lo && c < lo + self.side) && x.0[self.d..].iter().all(|&c| c == 0)
    }

    /// Representative of `x` modulo `side` in every coordinate.
    pub fn wrap(&self, x: Site) -> Site {
        let lo = self.lo();
        let mut c = x.0;
        for v in c.iter_mut().take(self.d) {
            *v = (*v - lo).rem_euclid(self.side) + lo;
        }
        Site(c)
    }

    /// Sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let lo = self.lo();
        let mut out = Vec::with_capacity(self.volume());
        let mut cur = [0i64; MAX_DIM];
        fn rec(level: usize, t: &Torus, lo: i64, cur: &mut [i64; MAX_DIM], out: &mut Vec<Site>) {
            if level == t.d {
                out.push(Site(*cur));
                return;
            }
            for v in lo..lo + t.side {
                cur[level] = v;
                rec(level + 1, t, lo, cur, out);
            }
            cur[level] = 0;
        }
        rec(0, self, lo, &mut cur, &mut out);
        out
    }

    /// Folded kernel `p_n(x, y) = sum_{z == y mod side} p(x, z)`, as a map
    /// from wrapped offset to probability.
    pub fn folded(&self, kernel: &Kernel) -> Vec<(Site, f64)> {
        let mut acc: std::collections::BTreeMap<Site, f64> = std::collections::BTreeMap::new();
        for (z, p) in kernel.support() {
            *acc.entry(self.wrap(z)).or_insert(0.0) += p;
        }
        acc.into_iter().collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("dimension {0} not supported (1..={MAX_DIM})")]
    Dimension(usize),
    #[error("kernel support is empty")]
    EmptySupport,
    #[error("offset {0} has {1} coordinates, kernel dimension is {2}")]
    OffsetDimension(String, usize, usize),
    #[error("kernel offset at the origin is not allowed")]
    OriginOffset,
    #[error("duplicate offset {0}")]
    DuplicateOffset(String),
    #[error("probability {0} for offset {1} is negative or not finite")]
    BadProbability(f64, String),
    #[error("probabilities sum to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("cannot parse site {0:?}")]
    Parse(String),
}

/// One support point of a kernel, as it appears in JSON.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelEntry {
    pub z: Vec<i64>,
    pub p: f64,
}

/// JSON form of a kernel: `{"d":1,"support":[{"z":[1],"p":0.7},{"z":[-1],"p":0.3}]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelSpec {
    pub d: usize,
    pub support: Vec<KernelEntry>,
}

/// Translation-invariant jump distribution `p(z)` with finite support.
///
/// The support is stored sorted lexicographically by offset; [`Kernel::sample_jump`]
/// inverts the CDF in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    d: usize,
    offsets: Vec<Site>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    range: i64,
}

impl Kernel {
    pub fn new(d: usize, entries: &[(Vec<i64>, f64)]) -> Result<Self, LatticeError> {
        if d == 0 || d > MAX_DIM {
            return Err(LatticeError::Dimension(d));
        }
        if entries.is_empty() {
            return Err(LatticeError::EmptySupport);
        }
        let mut support = Vec::with_capacity(entries.len());
        for (z, p) in entries {
            if z.len() != d {
                return Err(LatticeError::OffsetDimension(format!("{z:?}"), z.len(), d));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(LatticeError::BadProbability(*p, format!("{z:?}")));
            }
            let site = Site::from_coords(z)?;
            if site == Site::ORIGIN {
                return Err(LatticeError::OriginOffset);
            }
            support.push((site, *p));
        }
        support.sort_by(|a, b| a.0.cmp(&b.0));
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(LatticeError::DuplicateOffset(w[0].0.join(d)));
            }
        }
        let total: f64 = support.iter().map(|s| s.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LatticeError::NotNormalized(total));
        }
        let (offsets, probs): (Vec<Site>, Vec<f64>) =
            support.into_iter().map(|(s, p)| (s, p / total)).unzip();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let range = offsets.iter().map(Site::norm_max).max().unwrap_or(0);
        Ok(Kernel { d, offsets, probs, cdf, range })
    }

    /// Nearest-neighbour kernel on `Z` with `p(+1) = p`, `p(-1) = q = 1 - p`.
    /// Zero-probability offsets are dropped from the support.
    pub fn nearest_neighbour(p: f64) -> Result<Self, LatticeError> {
        let mut entries = Vec::new();
        if p > 0.0 {
            entries.push((vec![1], p));
        }
        if p < 1.0 {
            entries.push((vec![-1], 1.0 - p));
        }
        Kernel::new(1, &entries)
    }

    /// Simple symmetric random walk on `Z^d`.
    pub fn symmetric(d: usize) -> Result<Self, LatticeError> {
        let mut entries = Vec::new();
        for i in 0..d {
            for s in [-1, 1] {
                let mut z = vec![0; d];
                z[i] = s;
                entries.push((z, 0.5 / d as f64));
            }
        }
        Kernel::new(d, &entries)
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self, LatticeError> {
        let entries: Vec<_> = spec.support.iter().map(|e| (e.z.clone(), e.p)).collect();
        Kernel::new(spec.d, &entries)
    }

    pub fn to_spec(&self) -> KernelSpec {
        KernelSpec {
            d: self.d,
            support: self
                .support()
                .map(|(z, p)| KernelEntry { z: z.coords(self.d).to_vec(), p })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Max-norm radius of the support.
    pub fn range(&self) -> i64 {
        self.range
    }

    pub fn support(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.offsets.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn prob(&self, z: Site) -> f64 {
        self.offsets
            .binary_search(&z)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    /// `sum_z z p(z)`, component-wise.
    pub fn mean_drift(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for (z, p) in self.support() {
            for (mi, &zi) in m.iter_mut().zip(z.coords(self.d)) {
                *mi += zi as f64 * p;
            }
        }
        m
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_drift().iter().all(|m| m.abs() <= 1e-12)
    }

    /// `Some((p, q))` when this is a nearest-neighbour kernel on `Z`.
    pub fn is_nearest_neighbour_1d(&self) -> Option<(f64, f64)> {
        if self.d != 1 || self.offsets.iter().any(|z| z.0[0].abs() != 1) {
            return None;
        }
        Some((self.prob(Site::d1(1)), self.prob(Site::d1(-1))))
    }

    /// Inverse CDF in lexicographic offset order: the first offset whose
    /// cumulative probability exceeds `u`.
    pub fn sample_jump(&self, u: f64) -> Site {
        let i = self.cdf.partition_point(|&c| c <= u);
        // Rounding can leave the final cdf entry a hair below 1.
        self.offsets[i.min(self.offsets.len() - 1)]
    }
}

/// Jump rule of the simultaneous nearest-neighbour family: `+1` iff `u <= p`.
pub fn pq_jump(p: f64, u: f64) -> Site {
    if u <= p {
        Site::d1(1)
    } else {
        Site::d1(-1)
    }
}
