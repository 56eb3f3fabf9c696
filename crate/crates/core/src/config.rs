//! Sparse particle configurations, elementary moves, and recorded trajectories.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{box_sites, LatticeError, Site};
use crate::measures::FugacityMeasure;
use crate::noise;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("site entry {0} has count 0")]
    ZeroCount(usize),
    #[error("site {0} listed twice")]
    Duplicate(String),
    #[error("configuration dimension {0} does not match {1}")]
    DimensionMismatch(usize, usize),
}

/// Finite configuration: site -> count, zeros never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    d: usize,
    sites: BTreeMap<Site, u32>,
    total: u64,
}

impl Configuration {
    pub fn empty(d: usize) -> Self {
        Configuration { d, sites: BTreeMap::new(), total: 0 }
    }

    pub fn from_pairs(d: usize, pairs: impl IntoIterator<Item = (Site, u32)>) -> Self {
        let mut c = Self::empty(d);
        for (x, n) in pairs {
            c.add(x, n);
        }
        c
    }

    /// One-dimensional shorthand: `[(x, n), ...]`.
    pub fn d1(pairs: &[(i64, u32)]) -> Self {
        Self::from_pairs(1, pairs.iter().map(|&(x, n)| (Site::d1(x), n)))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, x: Site) -> u32 {
        self.sites.get(&x).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Occupied sites in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (Site, u32)> + '_ {
        self.sites.iter().map(|(s, n)| (*s, *n))
    }

    pub fn occupied_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn add(&mut self, x: Site, n: u32) {
        if n == 0 {
            return;
        }
        *self.sites.entry(x).or_insert(0) += n;
        self.total += n as u64;
    }

    /// Decrements `x` if occupied. Returns whether a particle was removed.
    pub fn remove_one(&mut self, x: Site) -> bool {
        match self.sites.get_mut(&x) {
            Some(n) => {
                *n -= 1;
                if *n == 0 {
                    self.sites.remove(&x);
                }
                self.total -= 1;
                true
            }
            None => false,
        }
    }

    /// In-place `eta^{x,y}`; no-op when `x` is empty.
    pub fn move_one(&mut self, x: Site, y: Site) -> bool {
        if self.remove_one(x) {
            self.add(y, 1);
            true
        } else {
            false
        }
    }

    /// `eta^{x,y}`: one particle from `x` to `y` if `eta(x) >= 1`, else unchanged.
    pub fn moved(&self, x: Site, y: Site) -> Self {
        let mut c = self.clone();
        c.move_one(x, y);
        c
    }

    /// `eta^x`: one particle removed from `x` if present.
    pub fn removed(&self, x: Site) -> Self {
        let mut c = self.clone();
        c.remove_one(x);
        c
    }

    /// Deletes every particle outside the max-norm box `[-n, n]^d`.
    pub fn truncate(&self, n: i64) -> Self {
        Self::from_pairs(self.d, self.iter().filter(|(x, _)| x.norm_max() <= n))
    }

    /// Coordinate-wise `self <= other`.
    pub fn leq(&self, other: &Configuration) -> bool {
        self.iter().all(|(x, n)| n <= other.get(x))
    }

    pub fn translate(&self, by: Site) -> Self {
        Self::from_pairs(self.d, self.iter().map(|(x, n)| (x.offset(by), n)))
    }

    /// Component-wise `(min, max)` corners, `None` when empty.
    pub fn bounding_box(&self) -> Option<(Site, Site)> {
        let mut it = self.sites.keys();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for x in it {
            for i in 0..self.d {
                lo.0[i] = lo.0[i].min(x.0[i]);
                hi.0[i] = hi.0[i].max(x.0[i]);
            }
        }
        Some((lo, hi))
    }

    /// Max-norm radius of the support.
    pub fn radius(&self) -> i64 {
        self.sites.keys().map(Site::norm_max).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> ConfigurationJson {
        ConfigurationJson {
            sites: self.iter().map(|(x, n)| SiteCount { x: x.coords(self.d).to_vec(), n }).collect(),
        }
    }

    pub fn from_json(json: &ConfigurationJson, d: usize) -> Result<Self, ConfigError> {
        let mut c = Self::empty(d);
        for (i, e) in json.sites.iter().enumerate() {
            if e.x.len() != d {
                return Err(ConfigError::DimensionMismatch(e.x.len(), d));
            }
            if e.n == 0 {
                return Err(ConfigError::ZeroCount(i));
            }
            let x = Site::from_coords(&e.x)?;
            if c.get(x) > 0 {
                return Err(ConfigError::Duplicate(x.join(d)));
            }
            c.add(x, e.n);
        }
        Ok(c)
    }
}

/// `{"sites":[{"x":[0],"n":5}]}`
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigurationJson {
    pub sites: Vec<SiteCount>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SiteCount {
    pub x: Vec<i64>,
    pub n: u32,
}

/// Rule describing a possibly infinite configuration; only finite windows
/// are ever materialized.
#[derive(Clone, Debug)]
pub enum ConfigRule {
    Explicit(Configuration),
    /// `eta(x) = density` everywhere.
    Constant { d: usize, density: u32 },
    /// `eta(x) = ||x||_max`.
    AbsValue { d: usize },
    /// I.i.d. sample of a product measure; each site's value is a function of
    /// `(seed, x)` so every window of the same rule agrees.
    Fugacity { measure: Arc<FugacityMeasure>, d: usize, seed: u64 },
}

impl ConfigRule {
    pub fn dim(&self) -> usize {
        match self {
            ConfigRule::Explicit(c) => c.dim(),
            ConfigRule::Constant { d, .. } | ConfigRule::AbsValue { d } | ConfigRule::Fugacity { d, .. } => *d,
        }
    }

    pub fn value(&self, x: Site) -> u32 {
        match self {
            ConfigRule::Explicit(c) => c.get(x),
            ConfigRule::Constant { density, .. } => *density,
            ConfigRule::AbsValue { .. } => x.norm_max() as u32,
            ConfigRule::Fugacity { measure, seed, .. } => {
                measure.sample_marginal(noise::site_uniform(*seed, x)) as u32
            }
        }
    }

    /// `eta^n`: the rule restricted to `[-n, n]^d`.
    pub fn window(&self, n: i64) -> Configuration {
        match self {
            ConfigRule::Explicit(c) => c.truncate(n),
            _ => {
                let d = self.dim();
                Configuration::from_pairs(d, box_sites(n, d).into_iter().map(|x| (x, self.value(x))))
            }
        }
    }
}

/// Box-averaged densities `(n, (2n+1)^{-d} sum_{||x|| <= n} eta(x))` for
/// `n = 1..=n_max`, with an advisory boundedness flag.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CesaroProfile {
    pub means: Vec<(i64, f64)>,
    /// Max over the upper half of the profile is at most twice the median of the lower half.
    pub bounded: bool,
}

pub fn cesaro_profile(rule: &ConfigRule, n_max: i64) -> CesaroProfile {
    let d = rule.dim();
    let mut shell = vec![0u64; n_max as usize + 1];
    match rule {
        ConfigRule::Explicit(c) => {
            for (x, n) in c.iter() {
                let r = x.norm_max();
                if r <= n_max {
                    shell[r as usize] += n as u64;
                }
            }
        }
        _ => {
            for x in box_sites(n_max, d) {
                shell[x.norm_max() as usize] += rule.value(x) as u64;
            }
        }
    }
    let mut acc = shell[0];
    let mut means = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        acc += shell[n as usize];
        let vol = ((2 * n + 1) as f64).powi(d as i32);
        means.push((n, acc as f64 / vol));
    }
    let bounded = if means.len() < 2 {
        true
    } else {
        let half = means.len() / 2;
        let mut low: Vec<f64> = means[..half].iter().map(|m| m.1).collect();
        low.sort_by(f64::total_cmp);
        let median = low[low.len() / 2];
        let top = means[half..].iter().map(|m| m.1).fold(f64::MIN, f64::max);
        top <= 2.0 * median
    };
    CesaroProfile { means, bounded }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Jump,
    /// Particle left the box and was removed; `dst` is where it would have landed.
    Kill,
    /// Jump whose target was folded back onto the torus.
    #[serde(rename = "periodic-wrap")]
    PeriodicWrap,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Jump => "jump",
            EventKind::Kill => "kill",
            EventKind::PeriodicWrap => "periodic-wrap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub src: Site,
    pub dst: Site,
    pub kind: EventKind,
    pub marginal: u32,
}

impl Event {
    pub fn apply(&self, c: &mut Configuration) -> bool {
        match self.kind {
            EventKind::Kill => c.remove_one(self.src),
            EventKind::Jump | EventKind::PeriodicWrap => c.move_one(self.src, self.dst),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("event {0} at t={1} leaves empty site {2}")]
    EmptySource(usize, f64, String),
    #[error("event {0} at t={1} is not after the previous event")]
    NonIncreasingTime(usize, f64),
    #[error("replayed final configuration differs from the recorded one")]
    FinalMismatch,
}

/// A simulated path: initial state, ordered jump events, and final state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub final_config: Configuration,
    pub horizon: f64,
    pub seed: u64,
    pub fingerprint: String,
}

impl Trajectory {
    pub fn kill_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Kill).count()
    }

    /// Replays the event log from the initial state, auditing every event.
    pub fn replay(&self) -> Result<Configuration, ReplayError> {
        let mut c = self.initial.clone();
        let mut last = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time > last) {
                return Err(ReplayError::NonIncreasingTime(i, e.time));
            }
            last = e.time;
            if !e.apply(&mut c) {
                return Err(ReplayError::EmptySource(i, e.time, e.src.join(c.dim())));
            }
        }
        Ok(c)
    }

    /// Full audit: replay succeeds and reproduces `final_config`.
    pub fn audit(&self) -> Result<(), ReplayError> {
        if self.replay()? == self.final_config {
            Ok(())
        } else {
            Err(ReplayError::FinalMismatch)
        }
    }

    /// Configurations at each of `times` (sorted ascending): state after all
    /// events with `time <= t`.
    pub fn snapshots(&self, times: &[f64]) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(times.len());
        let mut c = self.initial.clone();
        let mut i = 0;
        for &t in times {
            while i < self.events.len() && self.events[i].time <= t {
                self.events[i].apply(&mut c);
                i += 1;
            }
            out.push(c.clone());
        }
        out
    }

    pub fn snapshot_at(&self, t: f64) -> Configuration {
        self.snapshots(&[t]).pop().unwrap()
    }

    /// Event-log CSV: `time,src,dst,kind,marginal`, coordinates joined by `;`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let d = self.initial.dim();
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "src", "dst", "kind", "marginal"])?;
        for e in &self.events {
            wr.write_record([
                format!("{:?}", e.time),
                e.src.join(d),
                e.dst.join(d),
                e.kind.as_str().to_string(),
                e.marginal.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Parses an event-log CSV written by [`Trajectory::write_csv`].
pub fn read_events_csv<R: io::Read>(r: R) -> Result<Vec<Event>, Box<dyn std::error::Error + Send + Sync>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let kind = match &rec[3] {
            "jump" => EventKind::Jump,
            "kill" => EventKind::Kill,
            "periodic-wrap" => EventKind::PeriodicWrap,
            other => return Err(format!("unknown event kind {other:?}").into()),
        };
        out.push(Event {
            time: rec[0].parse()?,
            src: Site::parse_joined(&rec[1])?,
            dst: Site::parse_joined(&rec[2])?,
            kind,
            marginal: rec[4].parse()?,
        });
    }
    Ok(out)
}
