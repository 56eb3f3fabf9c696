use std::io;

use serde::{Deserialize, Serialize};

use super::{DiagError, Generator, LocalFunction, Start};
use crate::config::Trajectory;
use crate::engine::{simulate, BoundaryPolicy};
use crate::lattice::Kernel;
use crate::noise::HarrisNoise;
use crate::parallel::try_replicas;
use crate::rates::{RateError, RateFn};
use crate::stats::Summary;

/// Path functionals at one time `t`, integrals exact along the
/// piecewise-constant path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    /// `f(eta_t)`.
    pub f: f64,
    /// `Lf(eta_t)`.
    pub lf: f64,
    /// `int_0^t Lf(eta_s) ds`.
    pub integral: f64,
    /// `int_0^t sum_{x in A-bar} g(eta_s(x)) ds`.
    pub rate_integral: f64,
}

/// Evaluates [`PathSample`]s at ascending `times`.
pub fn path_integrals(
    traj: &Trajectory,
    f: &LocalFunction,
    gen: &Generator<'_>,
    times: &[f64],
) -> Result<Vec<PathSample>, RateError> {
    let sources = gen.sources(f);
    let mut c = traj.initial.clone();
    let rate_sum = |c: &crate::config::Configuration| -> Result<f64, RateError> {
        sources.iter().map(|&x| gen.rate.g(c.get(x) as u64)).sum()
    };
    let mut lf = gen.apply_over(f, &c, sources.iter().copied())?;
    let mut gsum = rate_sum(&c)?;
    let (mut last, mut integral, mut rate_integral) = (0.0, 0.0, 0.0);
    let mut events = traj.events.iter().peekable();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while let Some(e) = events.next_if(|e| e.time <= t) {
            integral += lf * (e.time - last);
            rate_integral += gsum * (e.time - last);
            last = e.time;
            e.apply(&mut c);
            if sources.contains(&e.src) || sources.contains(&e.dst) {
                lf = gen.apply_over(f, &c, sources.iter().copied())?;
                gsum = rate_sum(&c)?;
            }
        }
        integral += lf * (t - last);
        rate_integral += gsum * (t - last);
        last = t;
        out.push(PathSample { t, f: f.eval(&c), lf, integral, rate_integral });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct QuadraticVariation {
    /// Empirical `Var(M_T)`.
    pub var: f64,
    pub var_se: f64,
    /// `8 B^2 E[int_0^T sum_{A-bar} g]`.
    pub bound: f64,
    pub bound_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct MartingaleReport {
    pub function: String,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// `E[M_T]` estimate and its standard error.
    pub mean: f64,
    pub se: f64,
    /// `|mean| / se`.
    pub z: f64,
    pub pass: bool,
    /// `(t, mean M_t, se)` on the grid.
    pub curve: Vec<(f64, f64, f64)>,
    pub mean_f_final: f64,
    pub se_f_final: f64,
    pub mean_integral: f64,
    pub se_integral: f64,
    pub quadratic_variation: QuadraticVariation,
}

fn check_horizon(horizon: f64) -> Result<(), DiagError> {
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(DiagError::Invalid(format!("horizon must be finite and non-negative, got {horizon}")));
    }
    Ok(())
}

fn passes(mean: f64, se: f64, k: f64) -> bool {
    mean.abs() <= k * se + 1e-12
}

/// Estimates `E[M_T^f]`, `M_t^f = f(eta_t) - f(eta_0) - int_0^t Lf(eta_s) ds`,
/// over `replicas` runs, with the martingale curve on `grid_points` times and
/// the quadratic-variation bound `Var(M_T) <= 8 B^2 E[int sum_{A-bar} g]`.
#[allow(clippy::too_many_arguments)]
pub fn martingale_residual(
    f: &LocalFunction,
    start: &Start,
    rate: &RateFn,
    kernel: &Kernel,
    policy: BoundaryPolicy,
    horizon: f64,
    replicas: usize,
    seed: u64,
    grid_points: usize,
) -> Result<MartingaleReport, DiagError> {
    check_horizon(horizon)?;
    let mut report =
        MartingaleReport { function: f.name().to_string(), horizon, replicas, seed, pass: true, ..Default::default() };
    if horizon == 0.0 || replicas == 0 {
        report.quadratic_variation.pass = true;
        return Ok(report);
    }
    let gen = Generator::new(rate, kernel, policy);
    let grid = crate::engine::time_grid(horizon, grid_points.max(1));
    let runs: Vec<(f64, Vec<PathSample>)> = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let init = start.draw(s);
        let traj = simulate(&init, rate, kernel, &policy, horizon, &HarrisNoise::new(s))?;
        Ok((f.eval(&init), path_integrals(&traj, f, &gen, &grid)?))
    })?;
    let m = |i: usize| -> Vec<f64> { runs.iter().map(|(f0, p)| p[i].f - f0 - p[i].integral).collect() };
    report.curve = (0..grid.len())
        .map(|i| {
            let s = Summary::of(&m(i));
            (grid[i], s.mean, s.se)
        })
        .collect();
    let last = grid.len() - 1;
    let mt = m(last);
    let s = Summary::of(&mt);
    report.mean = s.mean;
    report.se = s.se;
    report.z = if s.se > 0.0 { s.mean.abs() / s.se } else { 0.0 };
    report.pass = passes(s.mean, s.se, 4.0);
    let ff = Summary::of(&runs.iter().map(|r| r.1[last].f).collect::<Vec<_>>());
    let fi = Summary::of(&runs.iter().map(|r| r.1[last].integral).collect::<Vec<_>>());
    report.mean_f_final = ff.mean;
    report.se_f_final = ff.se;
    report.mean_integral = fi.mean;
    report.se_integral = fi.se;

    let sq = Summary::of(&mt.iter().map(|v| (v - s.mean).powi(2)).collect::<Vec<_>>());
    let b2 = 8.0 * f.bound().powi(2);
    let rb = Summary::of(&runs.iter().map(|r| b2 * r.1[last].rate_integral).collect::<Vec<_>>());
    report.quadratic_variation = QuadraticVariation {
        var: sq.mean,
        var_se: sq.se,
        bound: rb.mean,
        bound_se: rb.se,
        pass: sq.mean <= rb.mean + 4.0 * (sq.se.powi(2) + rb.se.powi(2)).sqrt() + 1e-12,
    };
    Ok(report)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ForwardPoint {
    pub t: f64,
    pub mean_f: f64,
    /// Central difference of `E[f(eta_t)]`.
    pub dfdt: f64,
    pub dfdt_se: f64,
    /// `E[Lf(eta_t)]`.
    pub lf: f64,
    pub lf_se: f64,
    /// Estimated `|window average of E[Lf] - E[Lf(eta_t)]|`.
    pub discretization: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ForwardReport {
    pub function: String,
    pub delta: f64,
    pub replicas: usize,
    pub seed: u64,
    pub points: Vec<ForwardPoint>,
    pub pass: bool,
}

impl ForwardReport {
    /// CSV curve: `t,mean_f,dfdt,dfdt_se,lf,lf_se,discretization,pass`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "mean_f", "dfdt", "dfdt_se", "lf", "lf_se", "discretization", "pass"])?;
        for p in &self.points {
            wr.write_record([
                format!("{:?}", p.t),
                format!("{:?}", p.mean_f),
                format!("{:?}", p.dfdt),
                format!("{:?}", p.dfdt_se),
                format!("{:?}", p.lf),
                format!("{:?}", p.lf_se),
                format!("{:?}", p.discretization),
                p.pass.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Compares `d/dt E[f(eta_t)]` (central difference with half-width `delta`,
/// one-sided near 0) against `E[Lf(eta_t)]` at each of `times`. Agreement is
/// required within 4 combined standard errors plus the discretization
/// estimate, which is exact in expectation: the difference quotient equals
/// the window average of `E[Lf]`.
#[allow(clippy::too_many_arguments)]
pub fn forward_equation_check(
    f: &LocalFunction,
    start: &Start,
    rate: &RateFn,
    kernel: &Kernel,
    policy: BoundaryPolicy,
    times: &[f64],
    delta: f64,
    replicas: usize,
    seed: u64,
) -> Result<ForwardReport, DiagError> {
    if !(delta > 0.0) || times.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(DiagError::Invalid("times must be non-negative and delta positive".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    // (t - h, t, t + delta) per requested time.
    let windows: Vec<[f64; 3]> = sorted.iter().map(|&t| [t - delta.min(t), t, t + delta]).collect();
    let mut sample_times: Vec<f64> = windows.iter().flatten().copied().collect();
    sample_times.sort_by(f64::total_cmp);
    sample_times.dedup();
    let horizon = sample_times.last().copied().unwrap_or(delta);
    let gen = Generator::new(rate, kernel, policy);
    let runs: Vec<Vec<PathSample>> = try_replicas(seed, replicas, |_, s| -> Result<_, DiagError> {
        let init = start.draw(s);
        let traj = simulate(&init, rate, kernel, &policy, horizon, &HarrisNoise::new(s))?;
        Ok(path_integrals(&traj, f, &gen, &sample_times)?)
    })?;
    let at = |t: f64| sample_times.partition_point(|&s| s < t);
    let mut points = Vec::new();
    for w in &windows {
        let (a, b, c) = (at(w[0]), at(w[1]), at(w[2]));
        let width = w[2] - w[0];
        let diff = Summary::of(&runs.iter().map(|r| (r[c].f - r[a].f) / width).collect::<Vec<_>>());
        let lf = Summary::of(&runs.iter().map(|r| r[b].lf).collect::<Vec<_>>());
        let avg = Summary::of(&runs.iter().map(|r| (r[c].integral - r[a].integral) / width - r[b].lf).collect::<Vec<_>>());
        let mean_f = Summary::of(&runs.iter().map(|r| r[b].f).collect::<Vec<_>>()).mean;
        let tol = 4.0 * (diff.se.powi(2) + lf.se.powi(2)).sqrt() + avg.mean.abs();
        points.push(ForwardPoint {
            t: w[1],
            mean_f,
            dfdt: diff.mean,
            dfdt_se: diff.se,
            lf: lf.mean,
            lf_se: lf.se,
            discretization: avg.mean.abs(),
            pass: (diff.mean - lf.mean).abs() <= tol + 1e-12,
        });
    }
    let pass = points.iter().all(|p| p.pass);
    Ok(ForwardReport { function: f.name().to_string(), delta, replicas, seed, points, pass })
}
