//! Event-driven simulation of the zero-range process for finite configurations.
//!
//! [`simulate`] realizes the graphical construction: site `x` carries the
//! marked Poisson clock of [`HarrisNoise`]; an atom `(y, t, u)` moves a
//! particle out of `x` iff `y <= g(eta_{t-}(x))`, to `x + jump(u)`. Any two
//! runs on the same noise are coupled through shared atoms, which is how
//! ordered initial states, truncation levels, boundary policies and the
//! `(p, q)` family are compared pathwise.
//!
//! Only atoms below the current rate matter, so each occupied site reveals the
//! height bands covering `[0, g(eta(x))]` and nothing above. Bands are added
//! when the occupancy grows and dropped when it shrinks; since atoms are keyed
//! by cell, the realized path does not depend on this bookkeeping.
//!
//! [`simulate_gillespie`] is an independent next-reaction sampler with the
//! same law and unrelated noise, used as a distributional oracle.

mod family;
mod gillespie;
mod schedule;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Configuration, Event, EventKind, Trajectory};
use crate::lattice::{pq_jump, Kernel, Site, Torus};
use crate::noise::{bands_for_rate, BandCursor, HarrisNoise};
use crate::rates::{RateError, RateFn};

pub use family::{label_positions, simulate_pq_family, FamilyRun, Labelling, SandwichReport, SandwichViolation};
pub use gillespie::simulate_gillespie;
pub use schedule::{simulate_truncation_schedule, ScheduleReport, ScheduleRun};

/// Hard cap on events in one run.
pub const MAX_EVENTS: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("initial configuration has a particle at {0}, outside the simulation domain")]
    OutsideDomain(String),
    #[error("configuration dimension {0} does not match kernel dimension {1}")]
    Dimension(usize, usize),
    #[error("event limit {MAX_EVENTS} exceeded")]
    EventLimit,
    #[error("kernel is not nearest-neighbour on Z")]
    NotNearestNeighbour,
    #[error("coupling violation: {0}")]
    CouplingViolation(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// What happens to a particle whose target lies outside the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Whole lattice.
    Open,
    /// Particles leaving `[-n, n]^d` are removed.
    Killed { n: i64 },
    /// Targets folded onto the torus, i.e. the kernel `p_n`.
    Periodic { torus: Torus },
}

impl BoundaryPolicy {
    pub fn periodic(n: i64, d: usize) -> Self {
        BoundaryPolicy::Periodic { torus: Torus::centered(n, d) }
    }

    fn contains(&self, x: Site) -> bool {
        match self {
            BoundaryPolicy::Open => true,
            BoundaryPolicy::Killed { n } => x.norm_max() <= *n,
            BoundaryPolicy::Periodic { torus } => torus.contains(x),
        }
    }

    /// Resolved destination and event kind for a raw target `src + z`.
    pub fn resolve(&self, raw: Site) -> (Site, EventKind) {
        match self {
            BoundaryPolicy::Open => (raw, EventKind::Jump),
            BoundaryPolicy::Killed { n } => {
                if raw.norm_max() <= *n {
                    (raw, EventKind::Jump)
                } else {
                    (raw, EventKind::Kill)
                }
            }
            BoundaryPolicy::Periodic { torus } => {
                let w = torus.wrap(raw);
                (w, if w == raw { EventKind::Jump } else { EventKind::PeriodicWrap })
            }
        }
    }

    pub fn check_initial(&self, c: &Configuration) -> Result<(), SimError> {
        match c.iter().find(|(x, _)| !self.contains(*x)) {
            Some((x, _)) => Err(SimError::OutsideDomain(x.join(c.dim()))),
            None => Ok(()),
        }
    }
}

/// How an atom's uniform mark becomes a jump offset.
#[derive(Clone, Copy, Debug)]
pub(crate) enum JumpRule<'a> {
    /// Lexicographic inverse CDF of the kernel.
    Kernel(&'a Kernel),
    /// `+1` iff `u <= p`.
    Pq(f64),
}

impl JumpRule<'_> {
    fn offset(&self, u: f64) -> Site {
        match self {
            JumpRule::Kernel(k) => k.sample_jump(u),
            JumpRule::Pq(p) => pq_jump(*p, u),
        }
    }

    fn describe(&self) -> String {
        match self {
            JumpRule::Kernel(k) => format!("{:?}", k.to_spec()),
            JumpRule::Pq(p) => format!("pq({p})"),
        }
    }
}

pub(crate) fn fingerprint(kind: &str, rate: &RateFn, rule: &str, policy: &BoundaryPolicy, horizon: f64) -> String {
    format!("{kind}|{rate:?}|{rule}|{policy:?}|T={horizon:?}")
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    time: f64,
    site: Site,
    height: f64,
    mark: f64,
    band: u32,
    version: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed: BinaryHeap is a max-heap and we want the earliest atom.
    // Ties in time go to the lexicographically smaller site, then lower height.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.site.cmp(&self.site))
            .then_with(|| other.height.total_cmp(&self.height))
            .then_with(|| other.version.cmp(&self.version))
    }
}

struct Clock {
    cursors: Vec<BandCursor>,
    version: u64,
}

struct HarrisRun<'a> {
    noise: &'a HarrisNoise,
    rate: &'a RateFn,
    horizon: f64,
    occ: Configuration,
    clocks: HashMap<Site, Clock>,
    heap: BinaryHeap<Candidate>,
    next_version: u64,
}

impl HarrisRun<'_> {
    /// Re-derives the band set of `x` for its current occupancy and queues its
    /// next atom.
    fn refresh(&mut self, x: Site, now: f64) -> Result<(), SimError> {
        let k = self.occ.get(x);
        if k == 0 {
            self.clocks.remove(&x);
            return Ok(());
        }
        let needed = bands_for_rate(self.rate.g(k as u64)?);
        let version = self.next_version;
        self.next_version += 1;
        let clock = self.clocks.entry(x).or_insert_with(|| Clock { cursors: Vec::new(), version });
        clock.version = version;
        clock.cursors.truncate(needed as usize);
        for band in clock.cursors.len() as u32..needed {
            clock.cursors.push(BandCursor::after(self.noise, x, band, now));
        }
        let mut best: Option<Candidate> = None;
        for c in clock.cursors.iter_mut() {
            if let Some(a) = c.peek(self.noise, x, self.horizon) {
                let cand = Candidate { time: a.time, site: x, height: a.height, mark: a.mark, band: c.band, version };
                if best.map_or(true, |b| (a.time, a.height) < (b.time, b.height)) {
                    best = Some(cand);
                }
            }
        }
        if let Some(b) = best {
            self.heap.push(b);
        }
        Ok(())
    }
}

pub(crate) fn run_harris(
    initial: &Configuration,
    rate: &RateFn,
    rule: JumpRule<'_>,
    policy: &BoundaryPolicy,
    horizon: f64,
    noise: &HarrisNoise,
    marginal: u32,
) -> Result<Trajectory, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::BadHorizon(horizon));
    }
    policy.check_initial(initial)?;
    let mut run = HarrisRun {
        noise,
        rate,
        horizon,
        occ: initial.clone(),
        clocks: HashMap::new(),
        heap: BinaryHeap::new(),
        next_version: 0,
    };
    let sites: Vec<Site> = initial.iter().map(|(x, _)| x).collect();
    for x in sites {
        run.refresh(x, 0.0)?;
    }
    let mut events = Vec::new();
    while let Some(cand) = run.heap.pop() {
        let x = cand.site;
        match run.clocks.get_mut(&x) {
            Some(clock) if clock.version == cand.version => {
                let cursor = clock
                    .cursors
                    .iter_mut()
                    .find(|c| c.band == cand.band)
                    .expect("queued band is active");
                cursor.advance();
            }
            _ => continue,
        }
        let k = run.occ.get(x);
        if cand.height <= rate.g(k as u64)? {
            let raw = x.offset(rule.offset(cand.mark));
            let (dst, kind) = policy.resolve(raw);
            run.occ.remove_one(x);
            if kind != EventKind::Kill {
                run.occ.add(dst, 1);
            }
            events.push(Event { time: cand.time, src: x, dst, kind, marginal });
            if events.len() > MAX_EVENTS {
                return Err(SimError::EventLimit);
            }
            run.refresh(x, cand.time)?;
            if kind != EventKind::Kill && dst != x {
                run.refresh(dst, cand.time)?;
            }
        } else {
            run.refresh(x, cand.time)?;
        }
    }
    Ok(Trajectory {
        initial: initial.clone(),
        events,
        final_config: run.occ,
        horizon,
        seed: noise.seed,
        fingerprint: fingerprint("harris", rate, &rule.describe(), policy, horizon),
    })
}

/// Graphical-construction run of the process from `initial` over `[0, horizon]`.
pub fn simulate(
    initial: &Configuration,
    rate: &RateFn,
    kernel: &Kernel,
    policy: &BoundaryPolicy,
    horizon: f64,
    noise: &HarrisNoise,
) -> Result<Trajectory, SimError> {
    if initial.dim() != kernel.dim() {
        return Err(SimError::Dimension(initial.dim(), kernel.dim()));
    }
    run_harris(initial, rate, JumpRule::Kernel(kernel), policy, horizon, noise, 0)
}

/// Visits the joint state of several trajectories, driven by the same noise,
/// at time 0 and after each distinct event time (simultaneous events applied
/// together). Stops early when `visit` returns `false`.
pub fn coupled_walk(trajs: &[&Trajectory], mut visit: impl FnMut(f64, &[Configuration], &[&[Event]]) -> bool) {
    let mut states: Vec<Configuration> = trajs.iter().map(|t| t.initial.clone()).collect();
    let mut idx = vec![0usize; trajs.len()];
    let empty: Vec<&[Event]> = vec![&[]; trajs.len()];
    if !visit(0.0, &states, &empty) {
        return;
    }
    loop {
        let next = trajs
            .iter()
            .zip(&idx)
            .filter_map(|(t, &i)| t.events.get(i).map(|e| e.time))
            .fold(f64::INFINITY, f64::min);
        if !next.is_finite() {
            return;
        }
        let mut fired: Vec<&[Event]> = Vec::with_capacity(trajs.len());
        for (j, t) in trajs.iter().enumerate() {
            let start = idx[j];
            while idx[j] < t.events.len() && t.events[idx[j]].time == next {
                t.events[idx[j]].apply(&mut states[j]);
                idx[j] += 1;
            }
            fired.push(&t.events[start..idx[j]]);
        }
        if !visit(next, &states, &fired) {
            return;
        }
    }
}

/// Evenly spaced snapshot grid `T/m, 2T/m, ..., T`.
pub fn time_grid(horizon: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|i| horizon * i as f64 / m as f64).collect()
}

#[cfg(test)]
mod tests;
