use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{site, DiagnosticSpec, ExperimentConfig, ExperimentError, Prepared};
use crate::config::{ConfigRule, Configuration, ConfigurationJson, SiteCount};
use crate::diagnostics::{
    harris_vs_gillespie, j_inequality_check, martingale_residual, mass_conservation_check, poisson_flux_check,
    forward_equation_check, stationarity_exact, stationarity_statistical, DiagnosticReport, Reference, Start,
};
use crate::engine::{simulate, simulate_pq_family, simulate_truncation_schedule, BoundaryPolicy};
use crate::hitting::{estimate_f, exact_f_small, exp_moment_check, mbar, MbarOptions};
use crate::lattice::Torus;
use crate::measures::FugacityMeasure;
use crate::noise::{derive_seed, HarrisNoise};
use crate::parallel::{thread_count, try_replicas, with_threads};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub format: OutputFormat,
    pub reports: Vec<DiagnosticReport>,
    pub pass: bool,
    pub out_dir: PathBuf,
    /// Written files, relative to `out_dir`.
    pub files: Vec<String>,
}

impl RunSummary {
    /// 0 when every diagnostic passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: &'a str,
    format: OutputFormat,
    pass: bool,
    files: &'a [String],
}

type Artifact = (String, String);

/// Loads the config at `path` and runs it.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })?;
    let config = ExperimentConfig::from_json(&text)?;
    run_config(config, opts)
}

pub fn run_config(mut config: ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let prepared = config.prepare()?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("zrp-out").join(&config.name));
    let canonical = serde_json::to_string(&config).expect("config serializes");
    let hash: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    let (reports, mut artifacts) = with_threads(thread_count(opts.threads), || execute(&prepared, opts.format))?;
    let pass = reports.iter().all(|r| r.pass);
    artifacts.push(("config.json".into(), config.to_json() + "\n"));
    match opts.format {
        OutputFormat::Json => {
            artifacts.push(("reports.json".into(), serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"))
        }
        OutputFormat::Csv => artifacts.push(("summary.csv".into(), summary_csv(&reports))),
    }
    let mut files: Vec<String> = artifacts.iter().map(|a| a.0.clone()).collect();
    files.push("manifest.json".into());
    files.sort();
    let version = env!("CARGO_PKG_VERSION");
    let manifest = Manifest { name: &config.name, version, seed: config.seed, config_sha256: &hash, format: opts.format, pass, files: &files };
    artifacts.push(("manifest.json".into(), serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"));

    for (name, body) in &artifacts {
        let path = out_dir.join(name);
        let io = |source| ExperimentError::Io { path: path.display().to_string(), source };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::write(&path, body).map_err(io)?;
    }
    Ok(RunSummary {
        name: config.name.clone(),
        version: version.into(),
        seed: config.seed,
        config_sha256: hash,
        format: opts.format,
        reports,
        pass,
        out_dir,
        files,
    })
}

fn summary_csv(reports: &[DiagnosticReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test", "statistic", "threshold", "pass", "seed", "n_replicas"]).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.test.clone(),
            r.statistic.to_string(),
            r.threshold.to_string(),
            r.pass.to_string(),
            r.seed.to_string(),
            r.n_replicas.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn execute(p: &Prepared, format: OutputFormat) -> Result<(Vec<DiagnosticReport>, Vec<Artifact>), ExperimentError> {
    let c = &p.config;
    let logs = c.event_logs.min(c.replicas);
    let mut artifacts = try_replicas(c.seed, logs, |i, s| -> Result<Artifact, ExperimentError> {
        let traj = simulate(&p.start.draw(s), &p.rate, &p.kernel, &p.policy, c.horizon, &HarrisNoise::new(s))
            .map_err(|e| ExperimentError::from(("initial", e)))?;
        traj.audit().map_err(|e| ExperimentError::Invariant(format!("event log of replica {i}: {e}")))?;
        Ok((format!("events/replica_{i:04}.csv"), traj.csv_string()))
    })?;
    let master = derive_seed(c.seed, u64::MAX);
    let mut reports = Vec::new();
    for (j, spec) in c.diagnostics.iter().enumerate() {
        let field = format!("diagnostics[{j}]");
        let (report, extra) = diagnostic(p, spec, &field, derive_seed(master, j as u64), format)?;
        reports.push(report);
        artifacts.extend(extra.into_iter().map(|(name, body)| (format!("{j:02}_{}_{name}", spec.name()), body)));
    }
    Ok((reports, artifacts))
}

fn torus_of(p: &Prepared) -> Torus {
    match p.policy {
        BoundaryPolicy::Periodic { torus } => torus,
        _ => unreachable!("checked by prepare"),
    }
}

fn fixed<'a>(p: &'a Prepared, field: &str) -> Result<&'a Configuration, ExperimentError> {
    match &p.start {
        Start::Fixed(c) => Ok(c),
        Start::Sampled(_) => Err(ExperimentError::config(field, "needs a deterministic initial configuration")),
    }
}

fn config_of(field: &str, sites: &[SiteCount], d: usize) -> Result<Configuration, ExperimentError> {
    Configuration::from_json(&ConfigurationJson { sites: sites.to_vec() }, d).map_err(|e| ExperimentError::config(field, e))
}

fn diagnostic(
    p: &Prepared,
    spec: &DiagnosticSpec,
    field: &str,
    seed: u64,
    format: OutputFormat,
) -> Result<(DiagnosticReport, Vec<Artifact>), ExperimentError> {
    let c = &p.config;
    let (n, t, d) = (c.replicas, c.horizon, p.kernel.dim());
    let diag = |e| ExperimentError::from_diag(field, e);
    let hit = |e| ExperimentError::from_hitting(field, e);
    let name = spec.name();
    let mut extra: Vec<Artifact> = Vec::new();
    let report = match spec {
        DiagnosticSpec::Stationarity { alpha } => {
            let reference = p.measure.clone().map(Reference::Marginal).unwrap_or(Reference::Initial);
            let r = stationarity_statistical(&p.start, &reference, &p.rate, &p.kernel, torus_of(p), t, n, seed, *alpha)
                .map_err(diag)?;
            DiagnosticReport::new(name, r.chi.p_value, *alpha, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::StationarityExact { particles } => {
            let r = stationarity_exact(&p.rate, &p.kernel, torus_of(p), *particles).map_err(diag)?;
            DiagnosticReport::new(name, r.residual, 1e-12 * r.scale.max(1.0), r.pass, seed, 0).with_details(&r)
        }
        DiagnosticSpec::Mass { rho } => {
            let rho = match (rho, &p.measure) {
                (Some(r), _) => *r,
                (None, Some(m)) => m.density(),
                (None, None) => return Err(ExperimentError::config(format!("{field}.rho"), "required without a fugacity start")),
            };
            let r = mass_conservation_check(&p.start, &p.rate, &p.kernel, torus_of(p), t, n, seed, rho).map_err(diag)?;
            DiagnosticReport::new(name, (r.mean_origin - rho) / r.se.max(f64::MIN_POSITIVE), 4.0, r.pass, seed, n)
                .with_details(&r)
        }
        DiagnosticSpec::Martingale { function, grid_points } => {
            let f = function.build(&format!("{field}.function"), d)?;
            let r = martingale_residual(&f, &p.start, &p.rate, &p.kernel, p.policy, t, n, seed, *grid_points).map_err(diag)?;
            if format == OutputFormat::Csv {
                let rows: Vec<(f64, f64, f64)> = r.curve.clone();
                extra.push(("curve.csv".into(), "t,mean,se\n".to_string() + &to_csv(&rows)));
            }
            DiagnosticReport::new(name, r.z, 4.0, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::Forward { function, times, delta } => {
            let f = function.build(&format!("{field}.function"), d)?;
            let r = forward_equation_check(&f, &p.start, &p.rate, &p.kernel, p.policy, times, *delta, n, seed).map_err(diag)?;
            if format == OutputFormat::Csv {
                let mut buf = Vec::new();
                r.write_csv(&mut buf).expect("in-memory write");
                extra.push(("points.csv".into(), String::from_utf8(buf).expect("utf-8")));
            }
            let failing = r.points.iter().filter(|q| !q.pass).count();
            DiagnosticReport::new(name, failing as f64, 0.0, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::Oracle { window, alpha } => {
            let sites = window
                .iter()
                .enumerate()
                .map(|(i, x)| site(&format!("{field}.window[{i}]"), x, d))
                .collect::<Result<Vec<_>, _>>()?;
            let r = harris_vs_gillespie(&p.start, &p.rate, &p.kernel, p.policy, t, &sites, n, seed, *alpha).map_err(diag)?;
            DiagnosticReport::new(name, r.chi.p_value, *alpha, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::JInequality { zeta, psi } => {
            let (pr, _) = p
                .kernel
                .is_nearest_neighbour_1d()
                .ok_or_else(|| ExperimentError::config("kernel", "j_inequality needs a nearest-neighbour kernel on Z"))?;
            let zeta = config_of(&format!("{field}.zeta"), zeta, d)?;
            let psi = config_of(&format!("{field}.psi"), psi, d)?;
            let r = j_inequality_check(&zeta, &psi, &p.rate, pr, t, n, seed).map_err(diag)?;
            DiagnosticReport::new(name, r.violations.len() as f64, 0.0, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::Flux { phi, side } => {
            let m = Arc::new(FugacityMeasure::new(&p.rate, *phi).map_err(|e| ExperimentError::config(format!("{field}.phi"), e))?);
            let r = poisson_flux_check(&m, *side, t, n, seed).map_err(diag)?;
            DiagnosticReport::new(name, (r.mean - r.expected) / r.se.max(f64::MIN_POSITIVE), 4.0, r.pass, seed, n)
                .with_details(&r)
        }
        DiagnosticSpec::Sandwich { pq, labelling } => {
            let init = fixed(p, field)?;
            let runs = try_replicas(seed, n, |_, s| simulate_pq_family(init, &p.rate, t, s, pq, Some(*labelling)))
                .map_err(|e| ExperimentError::from((field, e)))?;
            let (mut checks, mut violations, mut reach) = (0, 0, 0);
            for r in runs.iter().filter_map(|r| r.sandwich.as_ref()) {
                checks += r.checks;
                violations += r.violations.len();
                reach += r.reach_violations;
            }
            let details = serde_json::json!({"labelling": labelling, "checks": checks, "violations": violations, "reach_violations": reach});
            DiagnosticReport::new(name, violations as f64, 0.0, violations == 0, seed, n).with_details(&details)
        }
        DiagnosticSpec::Schedule { levels, grid_points } => {
            let comparisons = try_replicas(seed, n, |_, s| {
                let rule = match (&p.rule, &p.measure) {
                    (Some(r), _) => r.clone(),
                    (None, Some(m)) => ConfigRule::Fugacity { measure: m.clone(), d, seed: derive_seed(s, 1) },
                    (None, None) => unreachable!("every initial spec yields a rule or a measure"),
                };
                simulate_truncation_schedule(&rule, levels, &p.rate, &p.kernel, t, s, *grid_points).map(|r| r.report.comparisons)
            })
            .map_err(|e| ExperimentError::from((field, e)))?;
            let total: usize = comparisons.iter().sum();
            let details = serde_json::json!({"levels": levels, "comparisons": total, "violations": 0});
            DiagnosticReport::new(name, 0.0, 0.0, true, seed, n).with_details(&details)
        }
        DiagnosticSpec::Hitting { z, grid, exact_radius } => {
            let z = site(&format!("{field}.z"), z, d)?;
            let curve = estimate_f(&p.kernel, z, grid, n, seed).map_err(hit)?;
            let mut disagree = 0;
            let mut brackets = Vec::new();
            if let Some(r) = exact_radius {
                for pt in &curve.points {
                    let b = exact_f_small(&p.kernel, z, pt.t, *r).map_err(hit)?;
                    disagree += usize::from(b.lower > pt.ci_high || b.upper < pt.ci_low);
                    brackets.push(b);
                }
            }
            if format == OutputFormat::Csv {
                let mut buf = Vec::new();
                curve.write_csv(&mut buf).expect("in-memory write");
                extra.push(("curve.csv".into(), String::from_utf8(buf).expect("utf-8")));
            }
            let details = serde_json::json!({"curve": curve, "brackets": brackets});
            DiagnosticReport::new(name, disagree as f64, 0.0, disagree == 0, seed, n).with_details(&details)
        }
        DiagnosticSpec::Mbar { z, cutoff, tail } => {
            let init = fixed(p, field)?;
            let z = site(&format!("{field}.z"), z, d)?;
            let opts = MbarOptions { cutoff: cutoff.unwrap_or(usize::MAX), tail: *tail, mc_replicas: n, seed, extend_to: None };
            let r = mbar(init, z, t, &p.rate, &p.kernel, &opts).map_err(hit)?;
            DiagnosticReport::new(name, r.total, f64::INFINITY, r.total.is_finite(), seed, n).with_details(&r)
        }
        DiagnosticSpec::ExpMoment { z, theta, grid_points } => {
            let init = fixed(p, field)?;
            let z = site(&format!("{field}.z"), z, d)?;
            let opts = MbarOptions { seed, ..MbarOptions::default() };
            let r = exp_moment_check(init, z, &p.rate, &p.kernel, *theta, t, n, seed, *grid_points, &opts).map_err(hit)?;
            if format == OutputFormat::Csv {
                extra.push(("points.csv".into(), to_csv(&r.points)));
            }
            let worst = r.points.iter().map(|q| q.ci_high).fold(f64::NEG_INFINITY, f64::max);
            DiagnosticReport::new(name, worst, r.bound, r.pass, seed, n).with_details(&r)
        }
        DiagnosticSpec::Corollary { n_max } => {
            let r = p
                .rate
                .check_corollary_conditions(&p.kernel, *n_max, c.fit_window)
                .map_err(|e| ExperimentError::config(format!("{field}.n_max"), e))?;
            DiagnosticReport::new(name, r.a_estimate, 2.0 / d as f64, true, seed, 0).with_details(&r)
        }
    };
    Ok((report, extra))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(diagnostics: serde_json::Value) -> ExperimentConfig {
        let v = serde_json::json!({
            "name": "poisson_case",
            "kernel": {"d": 1, "support": [{"z": [1], "p": 0.5}, {"z": [-1], "p": 0.5}]},
            "rate": {"family": "power", "a": 1.0},
            "initial": {"kind": "fugacity", "phi": 1.0},
            "boundary": {"kind": "periodic", "side": 7},
            "horizon": 1.0,
            "replicas": 400,
            "seed": 3,
            "event_logs": 2,
            "diagnostics": diagnostics,
        });
        ExperimentConfig::from_json(&v.to_string()).unwrap()
    }

    fn read_all(dir: &Path, files: &[String]) -> Vec<(String, Vec<u8>)> {
        files.iter().map(|f| (f.clone(), fs::read(dir.join(f)).unwrap())).collect()
    }

    #[test]
    fn happy_path_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let c = config(serde_json::json!([{"test": "stationarity"}, {"test": "mass"}]));
        let opts = RunOptions { out: Some(tmp.path().into()), ..Default::default() };
        let s = run_config(c, &opts).unwrap();
        assert_eq!(s.exit_code(), 0, "{:?}", s.reports);
        for f in ["manifest.json", "config.json", "summary.csv", "events/replica_0000.csv", "events/replica_0001.csv"] {
            assert!(s.files.contains(&f.to_string()), "{f}");
            assert!(tmp.path().join(f).exists());
        }
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(manifest["seed"], 3);
    }

    #[test]
    fn reruns_are_byte_identical_across_threads() {
        let diags = serde_json::json!([
            {"test": "stationarity"},
            {"test": "martingale", "function": {"kind": "min_occupancy", "x": [0], "m": 2}},
            {"test": "hitting", "z": [-1], "grid": [0.5, 1.0], "exact_radius": 10}
        ]);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = run_config(config(diags.clone()), &RunOptions { out: Some(a.path().into()), threads: Some(1), ..Default::default() })
            .unwrap();
        let sb = run_config(config(diags), &RunOptions { out: Some(b.path().into()), threads: Some(4), ..Default::default() })
            .unwrap();
        assert_eq!(sa.files, sb.files);
        assert_eq!(read_all(a.path(), &sa.files), read_all(b.path(), &sb.files));
    }

    #[test]
    fn seed_override_changes_hash() {
        let tmp = tempfile::tempdir().unwrap();
        let base = RunOptions { out: Some(tmp.path().into()), ..Default::default() };
        let s1 = run_config(config(serde_json::json!([])), &base).unwrap();
        let s2 = run_config(config(serde_json::json!([])), &RunOptions { seed: Some(99), ..base }).unwrap();
        assert_eq!(s2.seed, 99);
        assert_ne!(s1.config_sha256, s2.config_sha256);
    }

    #[test]
    fn json_format() {
        let tmp = tempfile::tempdir().unwrap();
        let opts = RunOptions { out: Some(tmp.path().into()), format: OutputFormat::Json, ..Default::default() };
        let s = run_config(config(serde_json::json!([{"test": "stationarity_exact", "particles": 2}])), &opts);
        // 7 sites exceed the canonical enumeration guard.
        assert_eq!(s.unwrap_err().exit_code(), 1);
        let mut c = config(serde_json::json!([{"test": "stationarity_exact", "particles": 2}]));
        c.boundary = crate::experiment::BoundarySpec::Periodic { side: 3 };
        let s = run_config(c, &opts).unwrap();
        assert!(s.files.contains(&"reports.json".to_string()));
        let v: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("reports.json")).unwrap()).unwrap();
        assert_eq!(v[0]["test"], "stationarity_exact");
        assert_eq!(v[0]["pass"], true);
    }

    #[test]
    fn diagnostic_failure_exits_two() {
        // An explicit start concentrated at the origin, compared against its
        // own initial histogram, is far from stationary.
        let tmp = tempfile::tempdir().unwrap();
        let mut c = config(serde_json::json!([{"test": "stationarity"}]));
        c.initial = crate::experiment::InitialSpec::Explicit { sites: vec![SiteCount { x: vec![0], n: 6 }] };
        c.replicas = 2000;
        let s = run_config(c, &RunOptions { out: Some(tmp.path().into()), ..Default::default() }).unwrap();
        assert_eq!(s.exit_code(), 2);
    }

    #[test]
    fn missing_file_is_config_error() {
        let e = run(Path::new("/nonexistent/zrp.json"), &RunOptions::default()).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
