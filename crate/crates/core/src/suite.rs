//! The acceptance matrix: thirteen numbered criteria, each run at full size
//! (`acceptance`) or with reduced replica counts (`smoke`). Every criterion
//! yields one or more [`CriterionLine`]s; supplementary lines carry a letter
//! suffix (`9a`, `9b`).

use std::error::Error;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Discrete, Poisson};
use thiserror::Error;

use crate::config::{ConfigRule, Configuration};
use crate::diagnostics::{
    harris_vs_gillespie, j_inequality_check, martingale_residual, poisson_flux_check, stationarity_exact,
    stationarity_statistical, Concentrated, LocalFunction, Reference, Start,
};
use crate::engine::{
    simulate, simulate_gillespie, simulate_pq_family, simulate_truncation_schedule, BoundaryPolicy, Labelling, SimError,
};
use crate::hitting::{estimate_f, exact_f_small, exp_moment_check, MbarOptions};
use crate::lattice::{Kernel, Site, Torus};
use crate::measures::{FugacityMeasure, ProductBoxSampler, TorusProductSampler};
use crate::noise::{derive_seed, HarrisNoise};
use crate::parallel::{replicas, try_replicas, with_threads};
use crate::rates::RateFn;

type Res<T> = Result<T, Box<dyn Error + Send + Sync>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Acceptance,
    Smoke,
}

impl FromStr for SuiteKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "acceptance" => Ok(SuiteKind::Acceptance),
            "smoke" => Ok(SuiteKind::Smoke),
            other => Err(format!("unknown suite {other:?}, expected acceptance or smoke")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SuiteError {
    #[error("no tests selected")]
    NoTestsSelected,
}

/// Criterion number, title, and runtime budget in seconds.
pub const CRITERIA: [(u32, &str, f64); 13] = [
    (1, "fugacity identity", 1.0),
    (2, "Poisson special case", 1.0),
    (3, "exact canonical stationarity", 5.0),
    (4, "statistical stationarity", 300.0),
    (5, "attractiveness and truncation monotonicity", 120.0),
    (6, "martingale residual", 300.0),
    (7, "Harris vs Gillespie", 180.0),
    (8, "j-inequality", 120.0),
    (9, "(p,q)-family sandwich", 60.0),
    (10, "hitting-curve closed form", 60.0),
    (11, "exponential moment bound", 300.0),
    (12, "Poisson flux", 180.0),
    (13, "determinism across thread counts", f64::INFINITY),
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CriterionLine {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
}

impl fmt::Display for CriterionLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let budget = self.budget_seconds.map(|b| format!(" / {b:.0}s")).unwrap_or_default();
        write!(
            f,
            "[{}] criterion {:<3} {:<45} {:>7.2}s{}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            budget,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SuiteSummary {
    pub kind: SuiteKind,
    pub seed: u64,
    pub lines: Vec<CriterionLine>,
    pub pass: bool,
}

impl SuiteSummary {
    pub fn line(&self, id: &str) -> Option<&CriterionLine> {
        self.lines.iter().find(|l| l.id == id)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

/// Replica counts for one suite kind.
#[derive(Clone, Copy, Debug)]
struct Scale {
    r3: usize,
    r4: usize,
    r5: usize,
}

impl Scale {
    fn of(kind: SuiteKind) -> Self {
        match kind {
            SuiteKind::Acceptance => Scale { r3: 1_000, r4: 10_000, r5: 100_000 },
            SuiteKind::Smoke => Scale { r3: 100, r4: 1_000, r5: 5_000 },
        }
    }
}

/// A sub-result: id suffix, title override, pass, detail.
struct Part {
    suffix: &'static str,
    title: Option<&'static str>,
    pass: bool,
    detail: String,
}

fn part(pass: bool, detail: String) -> Vec<Part> {
    vec![Part { suffix: "", title: None, pass, detail }]
}

/// Runs the selected criteria (`None` = all) and reports one line each.
pub fn run_suite(
    kind: SuiteKind,
    selection: Option<&[u32]>,
    seed: u64,
    mut on_line: impl FnMut(&CriterionLine),
) -> Result<SuiteSummary, SuiteError> {
    let chosen: Vec<(u32, &str, f64)> =
        CRITERIA.iter().copied().filter(|(id, _, _)| selection.map_or(true, |s| s.contains(id))).collect();
    if chosen.is_empty() {
        return Err(SuiteError::NoTestsSelected);
    }
    let scale = Scale::of(kind);
    let mut lines = Vec::new();
    for (id, title, budget) in chosen {
        let s = derive_seed(seed, id as u64);
        let start = Instant::now();
        let parts = match criterion(id, scale, s) {
            Ok(p) => p,
            Err(e) => part(false, format!("error: {e}")),
        };
        let seconds = start.elapsed().as_secs_f64();
        for p in parts {
            let line = CriterionLine {
                id: format!("{id}{}", p.suffix),
                title: p.title.unwrap_or(title).to_string(),
                pass: p.pass,
                detail: p.detail,
                seconds,
                budget_seconds: (kind == SuiteKind::Acceptance && budget.is_finite()).then_some(budget),
            };
            on_line(&line);
            lines.push(line);
        }
    }
    let pass = lines.iter().all(|l| l.pass);
    Ok(SuiteSummary { kind, seed, lines, pass })
}

fn criterion(id: u32, sc: Scale, seed: u64) -> Res<Vec<Part>> {
    match id {
        1 => c1_fugacity(),
        2 => c2_poisson(),
        3 => c3_exact_stationarity(),
        4 => c4_statistical_stationarity(sc, seed),
        5 => c5_attractiveness(sc, seed),
        6 => c6_martingale(sc, seed),
        7 => c7_oracle(sc, seed),
        8 => c8_j_inequality(sc, seed),
        9 => c9_sandwich(sc, seed),
        10 => c10_hitting(sc, seed),
        11 => c11_exp_moment(sc, seed),
        12 => c12_flux(sc, seed),
        13 => c13_determinism(sc, seed),
        _ => unreachable!("criterion ids come from CRITERIA"),
    }
}

/// `g(k) = round(e^k)` for `k = 1..=30`.
pub fn exp_table() -> RateFn {
    let values = std::iter::once(0.0).chain((1..=30).map(|k| (k as f64).exp().round())).collect();
    RateFn::table(values).expect("increasing table")
}

fn nn(p: f64) -> Kernel {
    Kernel::nearest_neighbour(p).expect("valid p")
}

fn sq() -> RateFn {
    RateFn::power(2.0).expect("valid exponent")
}

fn c1_fugacity() -> Res<Vec<Part>> {
    let mut worst: f64 = 0.0;
    for rate in [RateFn::linear(), sq(), exp_table()] {
        for phi in [0.1, 1.0, 3.0, 10.0] {
            let e = FugacityMeasure::new(&rate, phi)?.fugacity_identity();
            worst = worst.max((e - phi).abs() / phi);
        }
    }
    Ok(part(worst <= 1e-10, format!("max relative error {worst:.2e} (tol 1e-10), 12 cases")))
}

fn c2_poisson() -> Res<Vec<Part>> {
    let (mut pmf_err, mut z_err): (f64, f64) = (0.0, 0.0);
    for phi in [0.1, 1.0, 3.0, 10.0] {
        let m = FugacityMeasure::new(&RateFn::linear(), phi)?;
        let oracle = Poisson::new(phi)?;
        for k in 0..=20u64 {
            pmf_err = pmf_err.max((m.pmf(k as usize) - oracle.pmf(k)).abs());
        }
        let z = m.partition().log_z.exp();
        z_err = z_err.max((z - phi.exp()).abs() / phi.exp());
    }
    Ok(part(
        pmf_err <= 1e-12 && z_err <= 1e-12,
        format!("max pmf error {pmf_err:.2e}, max z(phi) relative error {z_err:.2e} (tol 1e-12)"),
    ))
}

fn c3_exact_stationarity() -> Res<Vec<Part>> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut pass = true;
    for side in [2, 3] {
        for n in [1, 2, 3] {
            for rate in [RateFn::linear(), sq()] {
                for p in [1.0, 0.7, 0.5] {
                    let r = stationarity_exact(&rate, &nn(p), Torus::with_side(side, 1), n)?;
                    worst = worst.max(r.residual);
                    pass &= r.residual <= 1e-12;
                    cases += 1;
                }
            }
        }
    }
    Ok(part(pass, format!("max global-balance residual {worst:.2e} over {cases} cases (tol 1e-12)")))
}

fn c4_statistical_stationarity(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let torus = Torus::with_side(11, 1);
    let rate = sq();
    let kernel = nn(0.7);
    let m = Arc::new(FugacityMeasure::new(&rate, 1.0)?);
    let sampler = TorusProductSampler { measure: m.clone(), torus };
    let reference = Reference::Marginal(m.clone());
    let good = stationarity_statistical(
        &Start::Sampled(Arc::new(sampler.clone())),
        &reference,
        &rate,
        &kernel,
        torus,
        2.0,
        sc.r5,
        seed,
        0.01,
    )?;
    let control = stationarity_statistical(
        &Start::Sampled(Arc::new(Concentrated(sampler))),
        &reference,
        &rate,
        &kernel,
        torus,
        2.0,
        sc.r5,
        derive_seed(seed, 1),
        0.01,
    )?;
    Ok(part(
        good.pass && !control.pass,
        format!(
            "mu_phi start p = {:.4} ({} bins), concentrated control p = {:.2e}, {} replicas",
            good.chi.p_value, good.chi.bins, control.chi.p_value, sc.r5
        ),
    ))
}

fn c5_attractiveness(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let levels = [5, 10, 20, 40];
    let kernel = nn(0.7);
    let mut violations = 0usize;
    let mut comparisons = 0usize;
    for (r, rate) in [RateFn::linear(), sq(), RateFn::exponential(1.0, 0.5)?].iter().enumerate() {
        let measure = Arc::new(FugacityMeasure::new(rate, 1.0)?);
        let out = replicas(derive_seed(seed, r as u64), sc.r3, |_, s| {
            let rule = ConfigRule::Fugacity { measure: measure.clone(), d: 1, seed: derive_seed(s, 1) };
            simulate_truncation_schedule(&rule, &levels, rate, &kernel, 1.0, s, 10)
        });
        for o in out {
            match o {
                Ok(run) => comparisons += run.report.comparisons,
                Err(SimError::CouplingViolation(_)) => violations += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(part(
        violations == 0,
        format!("{violations} violations, {comparisons} site comparisons, schedule {levels:?} x 3 rates x {} replicas", sc.r3),
    ))
}

fn c6_martingale(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let o = Site::ORIGIN;
    let box_start = |rate: &RateFn, n: i64| -> Res<Start> {
        let m = Arc::new(FugacityMeasure::new(rate, 1.0)?);
        Ok(Start::Sampled(Arc::new(ProductBoxSampler { measure: m, n, d: 1 })))
    };
    let fixed = Start::Fixed(Configuration::d1(&[(-1, 2), (0, 1), (2, 3)]));
    let long = Kernel::new(1, &[(vec![2], 0.3), (vec![-1], 0.7)])?;
    let sym2 = Kernel::symmetric(2)?;
    let o2 = Site::from_coords(&[0, 0])?;
    let start2 = Start::Fixed(Configuration::from_pairs(
        2,
        [(o2, 2), (Site::from_coords(&[1, 0])?, 1), (Site::from_coords(&[0, -1])?, 3)],
    ));
    let cases: Vec<(&str, LocalFunction, RateFn, Kernel, BoundaryPolicy, Start)> = vec![
        ("min(eta(0),2), g=k, (0.5,0.5)", LocalFunction::min_occupancy(o, 2), RateFn::linear(), nn(0.5), BoundaryPolicy::Open, fixed.clone()),
        ("1{eta(0)=1}, g=k^2, (0.7,0.3)", LocalFunction::indicator(o, 1), sq(), nn(0.7), BoundaryPolicy::Open, fixed.clone()),
        (
            "min(eta(0),3) 1{eta(1)=0}, g=e^{k/2}, (1,0)",
            LocalFunction::product(vec![LocalFunction::min_occupancy(o, 3), LocalFunction::indicator(Site::d1(1), 0)]),
            RateFn::exponential(1.0, 0.5)?,
            nn(1.0),
            BoundaryPolicy::Open,
            fixed,
        ),
        ("min(eta(1),1), g=k^2, range 2", LocalFunction::min_occupancy(Site::d1(1), 1), sq(), long, BoundaryPolicy::Open, box_start(&sq(), 5)?),
        ("min(eta(0),2), g=k, d=2 symmetric", LocalFunction::min_occupancy(o2, 2), RateFn::linear(), sym2, BoundaryPolicy::Open, start2),
        (
            "min(eta(0),2), g=k^2, killed n=3",
            LocalFunction::min_occupancy(o, 2),
            sq(),
            nn(0.5),
            BoundaryPolicy::Killed { n: 3 },
            box_start(&sq(), 3)?,
        ),
    ];
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (i, (_, f, rate, kernel, policy, start)) in cases.iter().enumerate() {
        let r = martingale_residual(f, start, rate, kernel, *policy, 1.0, sc.r4, derive_seed(seed, i as u64), 10)?;
        pass &= r.pass;
        worst = worst.max(r.z);
    }
    // One particle, totally asymmetric: f = 1{eta(0) >= 1} gives E f(eta_T) = e^{-T}.
    let single = martingale_residual(
        &LocalFunction::min_occupancy(o, 1),
        &Start::Fixed(Configuration::d1(&[(0, 1)])),
        &RateFn::linear(),
        &nn(1.0),
        BoundaryPolicy::Open,
        1.0,
        sc.r4,
        derive_seed(seed, 99),
        10,
    )?;
    let closed = (-1.0f64).exp();
    let single_ok = single.pass && (single.mean_f_final - closed).abs() <= 4.0 * single.se_f_final;
    Ok(part(
        pass && single_ok,
        format!(
            "max |mean|/SE {worst:.2} over {} cases; single particle E f(eta_1) = {:.4} +- {:.4} vs e^-1 = {closed:.4}",
            cases.len(),
            single.mean_f_final,
            single.se_f_final
        ),
    ))
}

fn c7_oracle(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let o = Site::ORIGIN;
    let window1 = [Site::d1(-1), o, Site::d1(1)];
    let sets: Vec<(Start, RateFn, Kernel, BoundaryPolicy, f64, Vec<Site>)> = vec![
        (Start::Fixed(Configuration::d1(&[(0, 3), (1, 1)])), sq(), nn(0.6), BoundaryPolicy::Open, 0.8, window1.to_vec()),
        (
            Start::Fixed(Configuration::d1(&[(-2, 2), (0, 2), (2, 2)])),
            RateFn::linear(),
            nn(1.0),
            BoundaryPolicy::periodic(2, 1),
            1.0,
            window1.to_vec(),
        ),
        (
            Start::Fixed(Configuration::from_pairs(2, [(o, 4)])),
            RateFn::exponential(1.0, 0.3)?,
            Kernel::symmetric(2)?,
            BoundaryPolicy::Killed { n: 2 },
            0.7,
            vec![o, Site::from_coords(&[1, 0])?, Site::from_coords(&[0, 1])?],
        ),
    ];
    let mut pass = true;
    let mut ps = Vec::new();
    for (i, (start, rate, kernel, policy, t, window)) in sets.iter().enumerate() {
        let r = harris_vs_gillespie(start, rate, kernel, *policy, *t, window, sc.r4, derive_seed(seed, i as u64), 0.001)?;
        pass &= r.pass;
        ps.push(format!("{:.3}", r.chi.p_value));
    }
    Ok(part(pass, format!("p-values [{}] at alpha 0.001, {} replicas each", ps.join(", "), sc.r4)))
}

fn c8_j_inequality(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let zeta = Configuration::d1(&[(-2, 1), (0, 4), (1, 1), (3, 2)]);
    let psi = Configuration::d1(&[(-1, 2), (0, 1), (2, 3)]);
    let mut total = 0;
    let mut checks = 0;
    for (i, (rate, p)) in [(RateFn::linear(), 0.5), (sq(), 0.5), (sq(), 0.8)].into_iter().enumerate() {
        let r = j_inequality_check(&zeta, &psi, &rate, p, 2.0, sc.r4, derive_seed(seed, i as u64))?;
        total += r.violations.len();
        checks += r.checks;
    }
    Ok(part(total == 0, format!("{total} violations in {checks} event-time checks, symmetric and asymmetric")))
}

fn c9_sandwich(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let init = Configuration::d1(&[(-2, 1), (0, 1), (1, 1)]);
    let pq = [(1.0, 0.0), (0.7, 0.3), (0.5, 0.5), (0.0, 1.0)];
    let tally = |labelling: Labelling| -> Res<(usize, usize, usize, usize)> {
        let runs = try_replicas(seed, sc.r3, |_, s| simulate_pq_family(&init, &RateFn::linear(), 2.0, s, &pq, Some(labelling)))?;
        let (mut bad_replicas, mut violations, mut checks, mut reach) = (0, 0, 0, 0);
        for r in runs.iter().filter_map(|r| r.sandwich.as_ref()) {
            bad_replicas += usize::from(!r.violations.is_empty());
            violations += r.violations.len();
            checks += r.checks;
            reach += r.reach_violations;
        }
        Ok((bad_replicas, violations, checks, reach))
    };
    let (bad, v, checks, reach) = tally(Labelling::Distance)?;
    let (pbad, pv, pchecks, _) = tally(Labelling::Positional)?;
    Ok(vec![
        Part {
            suffix: "",
            title: None,
            pass: v == 0,
            detail: format!("distance labels: {v} order violations in {bad} of {} replicas ({checks} checks)", sc.r3),
        },
        Part {
            suffix: "a",
            title: Some("sandwich, left-to-right labels (suppl.)"),
            pass: pv == 0,
            detail: format!("{pv} violations in {pbad} replicas ({pchecks} checks)"),
        },
        Part {
            suffix: "b",
            title: Some("sandwich, origin reach counts (suppl.)"),
            pass: reach == 0,
            detail: format!("{reach} reach-count violations"),
        },
    ])
}

fn c10_hitting(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let k = nn(1.0);
    let z = Site::d1(-1);
    let grid = [0.5, 1.0, 2.0];
    let curve = estimate_f(&k, z, &grid, sc.r5, seed)?;
    let mut mc_ok = true;
    let mut exact_err: f64 = 0.0;
    for p in &curve.points {
        let closed = 1.0 - (-p.t).exp();
        mc_ok &= (p.f - closed).abs() <= 4.0 * p.se;
        let b = exact_f_small(&k, z, p.t, 10)?;
        exact_err = exact_err.max((b.lower - closed).abs()).max((b.upper - closed).abs());
    }
    let shown: Vec<String> = curve.points.iter().map(|p| format!("{:.4}+-{:.4}", p.f, p.se)).collect();
    Ok(part(
        mc_ok && exact_err <= 1e-10,
        format!("MC [{}] ({} walks), absorbing-chain error {exact_err:.1e}", shown.join(", "), sc.r5),
    ))
}

fn c11_exp_moment(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let o = Site::ORIGIN;
    let cases: Vec<(Configuration, RateFn, Kernel, Site)> = vec![
        (Configuration::d1(&[(0, 10)]), sq(), nn(0.5), o),
        (Configuration::d1(&[(-2, 3), (-1, 1), (1, 2), (3, 1)]), RateFn::linear(), nn(0.7), o),
        (
            Configuration::from_pairs(2, [(Site::from_coords(&[0, 1])?, 2), (Site::from_coords(&[1, 1])?, 1), (Site::from_coords(&[-1, 0])?, 3)]),
            sq(),
            Kernel::symmetric(2)?,
            Site::from_coords(&[0, 0])?,
        ),
    ];
    let mut pass = true;
    let mut margin = f64::INFINITY;
    let mut runs = 0;
    for (i, (eta, rate, kernel, z)) in cases.iter().enumerate() {
        for (j, theta) in [0.25, 0.5].into_iter().enumerate() {
            let s = derive_seed(seed, (2 * i + j) as u64);
            let opts = MbarOptions { seed: s, ..MbarOptions::default() };
            let r = exp_moment_check(eta, *z, rate, kernel, theta, 1.0, sc.r4, s, 10, &opts)?;
            pass &= r.pass;
            let worst = r.points.iter().map(|p| r.bound - p.ci_high).fold(f64::INFINITY, f64::min);
            margin = margin.min(worst);
            runs += 1;
        }
    }
    Ok(part(pass, format!("{runs} runs; smallest bound - upper CI = {margin:.3}; first-moment domination checked")))
}

fn c12_flux(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let sets = [(RateFn::linear(), 2.0, 21), (sq(), 1.0, 41)];
    let mut pass = true;
    let mut shown = Vec::new();
    for (i, (rate, phi, side)) in sets.iter().enumerate() {
        let m = Arc::new(FugacityMeasure::new(rate, *phi)?);
        let r = poisson_flux_check(&m, *side, 1.0, sc.r4, derive_seed(seed, i as u64))?;
        pass &= r.pass;
        shown.push(format!(
            "mean {:.3}+-{:.3} vs {:.3}, dispersion {:.3}+-{:.3}",
            r.mean, r.se, r.expected, r.dispersion, r.dispersion_se
        ));
    }
    Ok(part(pass, shown.join("; ")))
}

/// Every event log of a fixed batch of runs, concatenated.
fn determinism_logs(sc: Scale, seed: u64) -> Res<String> {
    let n = sc.r3.min(200);
    let rate = sq();
    let measure = Arc::new(FugacityMeasure::new(&rate, 1.0)?);
    let torus = Torus::with_side(11, 1);
    let sampler = Start::Sampled(Arc::new(TorusProductSampler { measure: measure.clone(), torus }));
    let policy = BoundaryPolicy::Periodic { torus };
    let k = nn(0.7);
    let mut out = String::new();
    for log in try_replicas(seed, n, |_, s| -> Res<String> {
        let init = sampler.draw(s);
        let harris = simulate(&init, &rate, &k, &policy, 2.0, &HarrisNoise::new(s))?;
        let gill = simulate_gillespie(&init, &rate, &k, &policy, 2.0, s)?;
        let fam = simulate_pq_family(&Configuration::d1(&[(-2, 1), (0, 2), (1, 1)]), &rate, 2.0, s, &[(0.7, 0.3)], None)?;
        let rule = ConfigRule::Fugacity { measure: measure.clone(), d: 1, seed: derive_seed(s, 1) };
        let sched = simulate_truncation_schedule(&rule, &[5, 10], &rate, &k, 1.0, s, 4)?;
        let mut text = harris.csv_string() + &gill.csv_string();
        for t in fam.trajectories.iter().chain(&sched.trajectories) {
            text += &t.csv_string();
        }
        Ok(text)
    })? {
        out += &log;
    }
    Ok(out)
}

fn c13_determinism(sc: Scale, seed: u64) -> Res<Vec<Part>> {
    let many = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(4);
    let one = with_threads(1, || determinism_logs(sc, seed))?;
    let again = with_threads(1, || determinism_logs(sc, seed))?;
    let par = with_threads(many, || determinism_logs(sc, seed))?;
    let digest = |s: &str| -> String { Sha256::digest(s.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect() };
    Ok(part(
        one == again && one == par,
        format!("{} bytes of event logs; sha256 {} (1 thread), {} ({many} threads)", one.len(), digest(&one), digest(&par)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_selection_is_an_error() {
        assert_eq!(run_suite(SuiteKind::Smoke, Some(&[]), 1, |_| ()).unwrap_err().to_string(), "no tests selected");
        assert!(run_suite(SuiteKind::Smoke, Some(&[42]), 1, |_| ()).is_err());
    }

    #[test]
    fn exact_criteria_pass() {
        let s = run_suite(SuiteKind::Smoke, Some(&[1, 2, 3]), 1, |_| ()).unwrap();
        assert_eq!(s.lines.len(), 3);
        assert!(s.pass, "{:#?}", s.lines);
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("smoke".parse::<SuiteKind>().unwrap(), SuiteKind::Smoke);
        assert!("full".parse::<SuiteKind>().is_err());
    }

    #[test]
    fn exp_table_is_increasing() {
        let t = exp_table();
        assert_eq!((t.g(0).unwrap(), t.g(1).unwrap(), t.g(2).unwrap()), (0.0, 3.0, 7.0));
    }
}
