use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{coupled_walk, run_harris, BoundaryPolicy, JumpRule, SimError};
use crate::config::{Configuration, Event, Trajectory};
use crate::noise::HarrisNoise;
use crate::rates::RateFn;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SandwichViolation {
    pub time: f64,
    pub label: usize,
    pub p: f64,
    /// Positions under `(0,1)`, `(p,q)`, `(1,0)`.
    pub positions: [i64; 3],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SandwichReport {
    pub labelling: Labelling,
    pub labels: usize,
    /// Per-particle order checks performed.
    pub checks: usize,
    pub violations: Vec<SandwichViolation>,
    /// Times at which more particles starting left (right) of the origin had
    /// visited it under some `(p, q)` than under `(1,0)` (`(0,1)`). Counted
    /// with left-to-right labels whatever `labelling` is.
    pub reach_violations: usize,
}

/// Initial order of particle labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labelling {
    /// By distance to the origin, ties by site (`-x` before `+x`).
    #[default]
    Distance,
    /// Left to right.
    Positional,
}

#[derive(Clone, Debug)]
pub struct FamilyRun {
    pub pq: Vec<(f64, f64)>,
    pub trajectories: Vec<Trajectory>,
    pub sandwich: Option<SandwichReport>,
}

/// Initial position of each label; particles sharing a site get consecutive
/// labels.
pub fn label_positions(initial: &Configuration, labelling: Labelling) -> Vec<i64> {
    let mut sites: Vec<(i64, u32)> = initial.iter().map(|(x, n)| (x.0[0], n)).collect();
    if labelling == Labelling::Distance {
        sites.sort_by_key(|&(x, _)| (x.abs(), x));
    }
    sites.into_iter().flat_map(|(x, n)| std::iter::repeat(x).take(n as usize)).collect()
}

/// Labeled particles under the removal convention: a right jump takes the
/// highest label at the site, a left jump the lowest.
struct Labeled {
    at: BTreeMap<i64, Vec<usize>>,
    pos: Vec<i64>,
    visited: Vec<bool>,
}

impl Labeled {
    fn new(initial: &Configuration, labelling: Labelling) -> Self {
        let pos = label_positions(initial, labelling);
        let mut at: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &x) in pos.iter().enumerate() {
            at.entry(x).or_default().push(i);
        }
        let visited = pos.iter().map(|&x| x == 0).collect();
        Labeled { at, pos, visited }
    }

    /// Particles starting left and right of the origin that have visited it.
    fn reached(&self, start: &[i64]) -> (usize, usize) {
        let count = |side: fn(i64) -> bool| start.iter().zip(&self.visited).filter(|&(&x, &v)| v && side(x)).count();
        (count(|x| x < 0), count(|x| x > 0))
    }

    fn apply(&mut self, e: &Event) {
        let (src, dst) = (e.src.0[0], e.dst.0[0]);
        let list = self.at.get_mut(&src).expect("event source is occupied");
        // Lists are kept sorted.
        let label = if dst > src { list.pop().unwrap() } else { list.remove(0) };
        if list.is_empty() {
            self.at.remove(&src);
        }
        let l = self.at.entry(dst).or_default();
        let i = l.partition_point(|&v| v < label);
        l.insert(i, label);
        self.pos[label] = dst;
        self.visited[label] |= dst == 0;
    }
}

/// Nearest-neighbour runs for every `(p, q)` in `pq_list` on one set of atoms
/// and marks (`+1` iff `U <= p`). With a labelling, also tracks particle
/// labels and checks `X^{(0,1)}_i <= X^{(p,q)}_i <= X^{(1,0)}_i` after every
/// event.
pub fn simulate_pq_family(
    initial: &Configuration,
    rate: &RateFn,
    horizon: f64,
    seed: u64,
    pq_list: &[(f64, f64)],
    labelling: Option<Labelling>,
) -> Result<FamilyRun, SimError> {
    if initial.dim() != 1 {
        return Err(SimError::NotNearestNeighbour);
    }
    for &(p, q) in pq_list {
        if !(0.0..=1.0).contains(&p) || (p + q - 1.0).abs() > 1e-12 || q < 0.0 {
            return Err(SimError::Invalid(format!("({p}, {q}) is not a nearest-neighbour pair")));
        }
    }
    let noise = HarrisNoise::new(seed);
    let run = |p: f64, tag: u32| {
        run_harris(initial, rate, JumpRule::Pq(p), &BoundaryPolicy::Open, horizon, &noise, tag)
    };
    let trajectories = pq_list
        .iter()
        .enumerate()
        .map(|(i, &(p, _))| run(p, i as u32))
        .collect::<Result<Vec<_>, _>>()?;

    let sandwich = if let Some(labelling) = labelling {
        let find = |p: f64| pq_list.iter().position(|&(pp, _)| pp == p);
        let hi_owned;
        let hi = match find(1.0) {
            Some(i) => &trajectories[i],
            None => {
                hi_owned = run(1.0, u32::MAX - 1)?;
                &hi_owned
            }
        };
        let lo_owned;
        let lo = match find(0.0) {
            Some(i) => &trajectories[i],
            None => {
                lo_owned = run(0.0, u32::MAX)?;
                &lo_owned
            }
        };
        let mut all: Vec<&Trajectory> = vec![lo, hi];
        all.extend(trajectories.iter());
        let mut states: Vec<Labeled> = all.iter().map(|_| Labeled::new(initial, labelling)).collect();
        let mut ordered: Vec<Labeled> = all.iter().map(|_| Labeled::new(initial, Labelling::Positional)).collect();
        let start = label_positions(initial, Labelling::Positional);
        let mut report = SandwichReport { labelling, labels: start.len(), ..Default::default() };
        coupled_walk(&all, |time, _, fired| {
            for ((state, o), evs) in states.iter_mut().zip(ordered.iter_mut()).zip(fired) {
                for e in *evs {
                    state.apply(e);
                    o.apply(e);
                }
            }
            for (j, &(p, _)) in pq_list.iter().enumerate() {
                let mid = &states[j + 2].pos;
                let (left, right) = ordered[j + 2].reached(&start);
                if left > ordered[1].reached(&start).0 || right > ordered[0].reached(&start).1 {
                    report.reach_violations += 1;
                }
                for i in 0..report.labels {
                    report.checks += 1;
                    let (a, b, c) = (states[0].pos[i], mid[i], states[1].pos[i]);
                    if !(a <= b && b <= c) {
                        report.violations.push(SandwichViolation { time, label: i, p, positions: [a, b, c] });
                    }
                }
            }
            true
        });
        Some(report)
    } else {
        None
    };
    Ok(FamilyRun { pq: pq_list.to_vec(), trajectories, sandwich })
}
