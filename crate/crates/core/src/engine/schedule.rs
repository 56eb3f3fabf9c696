use serde::{Deserialize, Serialize};

use super::{simulate, time_grid, BoundaryPolicy, SimError};
use crate::config::{ConfigRule, Trajectory};
use crate::lattice::{box_sites, Kernel, Site};
use crate::noise::HarrisNoise;
use crate::rates::RateFn;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleReport {
    pub levels: Vec<i64>,
    pub grid: Vec<f64>,
    /// Site-by-site comparisons performed between consecutive levels.
    pub comparisons: usize,
    /// Sites of the smallest window whose occupancy agrees between the last
    /// two levels at every grid time.
    pub stabilized_sites: Vec<Vec<i64>>,
    pub window_sites: usize,
    pub origin_stable: bool,
    /// Stabilization is an empirical diagnostic with no rate attached.
    pub heuristic: bool,
}

#[derive(Clone, Debug)]
pub struct ScheduleRun {
    pub trajectories: Vec<Trajectory>,
    pub report: ScheduleReport,
}

/// Runs the truncations `eta^{n_1}, eta^{n_2}, ...` of `rule` on one shared
/// noise (open lattice) and verifies `eta^{n_i}_t <= eta^{n_{i+1}}_t` at
/// `grid_points` evenly spaced times. A violation is an error: it can only
/// come from a broken coupling.
pub fn simulate_truncation_schedule(
    rule: &ConfigRule,
    schedule: &[i64],
    rate: &RateFn,
    kernel: &Kernel,
    horizon: f64,
    seed: u64,
    grid_points: usize,
) -> Result<ScheduleRun, SimError> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] < 0 {
        return Err(SimError::Invalid(format!("schedule must be non-negative and increasing: {schedule:?}")));
    }
    let noise = HarrisNoise::new(seed);
    let trajectories = schedule
        .iter()
        .map(|&n| simulate(&rule.window(n), rate, kernel, &BoundaryPolicy::Open, horizon, &noise))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = time_grid(horizon, grid_points);
    let snaps: Vec<_> = trajectories.iter().map(|t| t.snapshots(&grid)).collect();
    let d = rule.dim();

    let mut comparisons = 0;
    for (i, pair) in snaps.windows(2).enumerate() {
        for (g, (lo, hi)) in pair[0].iter().zip(&pair[1]).enumerate() {
            comparisons += lo.occupied_sites();
            if let Some((x, n)) = lo.iter().find(|&(x, n)| n > hi.get(x)) {
                return Err(SimError::CouplingViolation(format!(
                    "level {} has {} at {} but level {} has {} at t={}",
                    schedule[i],
                    n,
                    x.join(d),
                    schedule[i + 1],
                    hi.get(x),
                    grid[g]
                )));
            }
        }
    }

    let window: Vec<Site> = box_sites(schedule[0], d);
    let stabilized: Vec<Site> = if snaps.len() < 2 {
        window.clone()
    } else {
        let (a, b) = (&snaps[snaps.len() - 2], &snaps[snaps.len() - 1]);
        window
            .iter()
            .copied()
            .filter(|&x| a.iter().zip(b).all(|(ca, cb)| ca.get(x) == cb.get(x)))
            .collect()
    };
    let report = ScheduleReport {
        levels: schedule.to_vec(),
        grid,
        comparisons,
        origin_stable: stabilized.contains(&Site::ORIGIN),
        stabilized_sites: stabilized.iter().map(|x| x.coords(d).to_vec()).collect(),
        window_sites: window.len(),
        heuristic: true,
    };
    Ok(ScheduleRun { trajectories, report })
}
