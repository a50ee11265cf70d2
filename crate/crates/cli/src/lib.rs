//! Command-line experiments: every subcommand turns a [`RunConfig`] into one JSON or CSV artifact.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lefschetz_core::bounds::{flat_bound, hodge_bound_flat_torus};
use lefschetz_core::cutflow::{bound_check, cut_set_estimate, DeformationTube};
use lefschetz_core::oracles::{cohomological_lefschetz, find_fixed_points, fixed_set_point_sum, fixed_submanifold_sum};
use lefschetz_core::quadrature::build_grid;
use lefschetz_core::{
    compute_lefschetz, sweep_t, ComputeOptions, LefError, LefschetzReport, ModelGeometry, ProfileKind, SelfMap,
    SmoothSelfMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SWEEP: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lef(#[from] LefError),
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 4 for a failed acceptance run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Json(_) => 2,
            CliError::Lef(e) => match e {
                LefError::Parse(_)
                | LefError::InvalidArgument(_)
                | LefError::UnsupportedManifold(_)
                | LefError::ManifoldMismatch(_) => 2,
                _ => 3,
            },
            CliError::Acceptance(_) => 4,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// ε as a fraction of the injectivity radius, or the cut-locus tube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Fraction(f64),
    Cut(CutTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutTag {
    Cut,
}

impl EpsilonSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s == "cut" {
            return Ok(EpsilonSpec::Cut(CutTag::Cut));
        }
        let v: f64 = s.parse().map_err(|_| CliError::Usage(format!("epsilon fraction '{s}'")))?;
        let e = EpsilonSpec::Fraction(v);
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> CliResult<()> {
        match *self {
            EpsilonSpec::Fraction(v) if !(v > 0.0 && v <= 0.5) => {
                Err(CliError::Usage(format!("epsilon fraction {v} outside (0, 0.5]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EpsilonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSpec::Fraction(v) => write!(f, "{v}"),
            EpsilonSpec::Cut(_) => write!(f, "cut"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Everything a subcommand needs; flags and `--config` files both land here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Inferred from the map family when absent.
    #[serde(default)]
    pub manifold: Option<String>,
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub profile: Option<ProfileKind>,
    pub epsilon: EpsilonSpec,
    #[serde(default)]
    pub resolution: Option<usize>,
    pub t: Vec<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Subcommand default when absent: CSV for `sweep` and `cutlocus`, JSON otherwise.
    #[serde(default)]
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifold: None,
            map: None,
            profile: None,
            epsilon: EpsilonSpec::Fraction(0.45),
            resolution: None,
            t: vec![1.0],
            out: None,
            seed: DEFAULT_SEED,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn geometry(&self) -> CliResult<ModelGeometry> {
        match (&self.manifold, &self.map) {
            (Some(m), _) => Ok(m.parse()?),
            (None, Some(map)) => Ok(SmoothSelfMap::natural_geometry(map)?),
            (None, None) => Err(CliError::Usage("--manifold or --map is required".into())),
        }
    }

    pub fn self_map(&self) -> CliResult<SmoothSelfMap> {
        let map = self.map.as_deref().ok_or_else(|| CliError::Usage("--map is required".into()))?;
        Ok(SmoothSelfMap::parse(map, &self.geometry()?)?)
    }

    pub fn compute_options(&self, m: &ModelGeometry) -> CliResult<ComputeOptions> {
        self.epsilon.validate()?;
        let mut o = ComputeOptions::for_geometry(m, self.resolution.unwrap_or_else(|| default_resolution(m)));
        if let Some(p) = self.profile {
            o.profile = p;
        }
        match self.epsilon {
            EpsilonSpec::Fraction(v) => o.eps = v * m.injectivity_radius(),
            EpsilonSpec::Cut(_) => o.tube = DeformationTube::CutLocus,
        }
        if let [t] = self.t[..] {
            o.t = t;
        }
        Ok(o)
    }
}

pub fn default_resolution(m: &ModelGeometry) -> usize {
    match m {
        ModelGeometry::Circle { .. } => 4096,
        ModelGeometry::Torus { .. } => 256,
        _ => 512,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lefschetz", version, about = "Lefschetz numbers by Thom-form quadrature")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One quadrature of the pulled-back Thom form, written as a JSON report.
    Compute(CommonArgs),
    /// Quadrature over a list of deformation times, written as CSV.
    Sweep(CommonArgs),
    /// Fixed-point index sum against the cohomological trace.
    Verify(CommonArgs),
    /// Grid nodes with their cut-locus margin, written as CSV.
    Cutlocus(CommonArgs),
    /// |L − χ| against the size of the cut set of f.
    Bounds(CommonArgs),
    /// Flat and harmonic-form bounds on |L| for a torus map.
    BoundsHodge(CommonArgs),
    /// Full acceptance matrix with a summary table.
    Suite(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON RunConfig; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifold: Option<String>,
    #[arg(long)]
    pub map: Option<String>,
    /// sec | tan | rational
    #[arg(long)]
    pub profile: Option<String>,
    /// Fraction of the injectivity radius in (0, 0.5], or `cut`.
    #[arg(long = "epsilon-frac")]
    pub epsilon_frac: Option<String>,
    #[arg(long)]
    pub res: Option<usize>,
    /// A single value or a comma-separated list.
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl CommonArgs {
    pub fn to_config(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if self.manifold.is_some() {
            c.manifold = self.manifold.clone();
        }
        if self.map.is_some() {
            c.map = self.map.clone();
        }
        if let Some(p) = &self.profile {
            c.profile = Some(ProfileKind::parse(p)?);
        }
        if let Some(e) = &self.epsilon_frac {
            c.epsilon = EpsilonSpec::parse(e)?;
        }
        if self.res.is_some() {
            c.resolution = self.res;
        }
        if let Some(t) = &self.t {
            c.t = parse_t_list(t)?;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.format.is_some() {
            c.format = self.format;
        }
        c.epsilon.validate()?;
        Ok(c)
    }
}

pub fn parse_t_list(s: &str) -> CliResult<Vec<f64>> {
    let ts = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("t value '{v}'"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage(format!("t list '{s}' must be positive and finite")));
    }
    Ok(ts)
}

/// 17 significant digits, locale independent.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub oracle_fp: i64,
    pub oracle_cohom: i64,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeReport {
    #[serde(rename = "L")]
    pub l: i64,
    pub flat_bound: f64,
    pub hodge_bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub map: String,
    pub profile: ProfileKind,
    pub oracle: i64,
    pub integral: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// What a subcommand produced; `text` goes to stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    pub written: Option<PathBuf>,
}

pub fn run(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Compute(a) => compute(&a.to_config()?),
        Command::Sweep(a) => {
            let mut c = a.to_config()?;
            if a.t.is_none() && a.config.is_none() {
                c.t = DEFAULT_SWEEP.to_vec();
            }
            sweep(&c)
        }
        Command::Verify(a) => verify(&a.to_config()?),
        Command::Cutlocus(a) => cutlocus(&a.to_config()?),
        Command::Bounds(a) => bounds(&a.to_config()?),
        Command::BoundsHodge(a) => bounds_hodge(&a.to_config()?),
        Command::Suite(a) => suite(&a.to_config()?),
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<Outcome> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = out {
        fs::write(p, format!("{text}\n"))?;
    }
    Ok(Outcome { text, written: out.map(Path::to_path_buf) })
}

fn emit_csv(header: &[String], rows: &[Vec<String>], out: Option<&Path>) -> CliResult<Outcome> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    match out {
        Some(p) => {
            fs::File::create(p)?.write_all(text.as_bytes())?;
            Ok(Outcome { text: format!("wrote {} rows to {}", rows.len(), p.display()), written: Some(p.to_path_buf()) })
        }
        None => Ok(Outcome { text, written: None }),
    }
}

pub fn compute(c: &RunConfig) -> CliResult<Outcome> {
    if c.t.len() != 1 {
        return Err(CliError::Usage("compute takes a single --t; use sweep for lists".into()));
    }
    let f = c.self_map()?;
    let report = compute_lefschetz(&f, &c.compute_options(f.geometry())?)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    emit_json(&report, Some(&out))
}

pub fn sweep(c: &RunConfig) -> CliResult<Outcome> {
    let f = c.self_map()?;
    let reports = sweep_t(&f, &c.compute_options(f.geometry())?, &c.t)?;
    if c.format == Some(Format::Json) {
        return emit_json(&reports, c.out.as_deref());
    }
    let opt = |v: Option<String>| v.unwrap_or_default();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r: &LefschetzReport| {
            vec![
                fmt_num(r.t),
                fmt_num(r.integral),
                opt(r.oracle.map(|o| o.to_string())),
                opt(r.residual.map(fmt_num)),
                opt(r.mass_fraction.map(fmt_num)),
            ]
        })
        .collect();
    let header: Vec<String> = ["t", "integral", "oracle", "residual", "mass_fraction"].map(String::from).to_vec();
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    emit_csv(&header, &rows, Some(&out))
}

pub fn verify_map(f: &SmoothSelfMap) -> CliResult<VerifyReport> {
    let set = find_fixed_points(f)?;
    let oracle_fp = if set.submanifolds.is_empty() {
        fixed_set_point_sum(&set)?
    } else {
        fixed_submanifold_sum(&set.components())?
    };
    let oracle_cohom = cohomological_lefschetz(f)?;
    Ok(VerifyReport { oracle_fp, oracle_cohom, agree: oracle_fp == oracle_cohom })
}

pub fn verify(c: &RunConfig) -> CliResult<Outcome> {
    emit_json(&verify_map(&c.self_map()?)?, c.out.as_deref())
}

pub fn cutlocus(c: &RunConfig) -> CliResult<Outcome> {
    let f = c.self_map()?;
    let m = f.geometry();
    let grid = build_grid(m, c.resolution.unwrap_or_else(|| default_resolution(m)))?;
    let est = cut_set_estimate(&f, &grid)?;
    if c.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Summary<'a> {
            class: lefschetz_core::cutflow::CutClass,
            count: Option<usize>,
            tolerance: f64,
            flagged: usize,
            points: Vec<&'a [f64]>,
        }
        let s = Summary {
            class: est.class,
            count: est.count(),
            tolerance: est.tolerance,
            flagged: est.samples.iter().filter(|s| s.in_c_f).count(),
            points: est.points.iter().map(|p| p.coords()).collect(),
        };
        return emit_json(&s, c.out.as_deref());
    }
    let k = m.ambient_dim();
    let mut header: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    header.push("margin".into());
    header.push("in_C_f".into());
    let rows: Vec<Vec<String>> = est
        .samples
        .iter()
        .map(|s| {
            let mut r: Vec<String> = s.x.coords().iter().map(|v| fmt_num(*v)).collect();
            r.push(fmt_num(s.margin));
            r.push(s.in_c_f.to_string());
            r
        })
        .collect();
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("cut.csv"));
    emit_csv(&header, &rows, Some(&out))
}

pub fn bounds(c: &RunConfig) -> CliResult<Outcome> {
    let f = c.self_map()?;
    let m = f.geometry();
    let res = c.resolution.unwrap_or(match m {
        ModelGeometry::Sphere2 => 128,
        _ => 64,
    });
    emit_json(&bound_check(&f, res)?, c.out.as_deref())
}

pub fn hodge_report(f: &SmoothSelfMap, c: &RunConfig) -> CliResult<HodgeReport> {
    let o = c.compute_options(f.geometry())?;
    let flat = flat_bound(f, &o.radial())?;
    let hodge = hodge_bound_flat_torus(f)?;
    let l = flat.l;
    let satisfied = flat.bound >= l.abs() as f64 && hodge.bound >= l.abs() as f64;
    Ok(HodgeReport { l, flat_bound: flat.bound, hodge_bound: hodge.bound, satisfied })
}

pub fn bounds_hodge(c: &RunConfig) -> CliResult<Outcome> {
    let f = c.self_map()?;
    emit_json(&hodge_report(&f, c)?, c.out.as_deref())
}

/// Seeded nondegenerate 2×2 integer matrices with entries in [−3, 3].
pub fn random_torus_maps(seed: u64, count: usize) -> Vec<SmoothSelfMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let e: Vec<i64> = (0..4).map(|_| rng.random_range(-3..=3)).collect();
        if (1 - e[0]) * (1 - e[3]) - e[1] * e[2] != 0 {
            out.push(SmoothSelfMap::torus_linear(2, &e));
        }
    }
    out
}

struct SuiteCase {
    map: SmoothSelfMap,
    profile: Option<ProfileKind>,
    resolution: usize,
    tolerance: f64,
}

fn suite_cases(seed: u64) -> Vec<SuiteCase> {
    let mut cases = Vec::new();
    for n in (-3..=5).filter(|n| *n != 1) {
        for p in [ProfileKind::Secant, ProfileKind::RationalOdd] {
            cases.push(SuiteCase { map: SmoothSelfMap::circle_power(n), profile: Some(p), resolution: 16384, tolerance: 1e-4 });
        }
    }
    for map in random_torus_maps(seed, 10) {
        cases.push(SuiteCase { map, profile: None, resolution: 256, tolerance: 1e-3 });
    }
    let sphere = [
        (SmoothSelfMap::sphere_rotation([0.0, 0.0, 1.0], 1.0), 1e-3),
        (SmoothSelfMap::sphere_reflection([0.0, 0.0, 1.0]), 1e-3),
        (SmoothSelfMap::suspension(2), 1e-2),
    ];
    for (map, tolerance) in sphere {
        cases.push(SuiteCase { map, profile: None, resolution: 512, tolerance });
    }
    cases
}

pub fn suite_rows(c: &RunConfig) -> CliResult<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for case in suite_cases(c.seed) {
        let m = case.map.geometry();
        let mut o = ComputeOptions::for_geometry(m, c.resolution.unwrap_or(case.resolution));
        if let Some(p) = c.profile.or(case.profile) {
            o.profile = p;
        }
        let r = compute_lefschetz(&case.map, &o)?;
        let oracle = r.oracle.ok_or_else(|| CliError::Acceptance(format!("no oracle for {}", r.map)))?;
        let residual = (r.integral - oracle as f64).abs();
        rows.push(SuiteRow {
            map: r.map,
            profile: o.profile,
            oracle,
            integral: r.integral,
            residual,
            tolerance: case.tolerance,
            pass: residual <= case.tolerance,
        });
    }
    Ok(rows)
}

pub fn suite_table(rows: &[SuiteRow]) -> String {
    let w = rows.iter().map(|r| r.map.len()).max().unwrap_or(3).max(3);
    let mut s = format!("{:<w$}  {:<8}  {:>6}  {:>12}  {:>9}  result\n", "map", "profile", "oracle", "integral", "residual");
    for r in rows {
        s += &format!(
            "{:<w$}  {:<8}  {:>6}  {:>12.8}  {:>9.2e}  {}\n",
            r.map,
            r.profile.label(),
            r.oracle,
            r.integral,
            r.residual,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    s += &format!("{passed}/{} passed", rows.len());
    s
}

pub fn suite(c: &RunConfig) -> CliResult<Outcome> {
    let rows = suite_rows(c)?;
    let table = suite_table(&rows);
    if let Some(p) = &c.out {
        match c.format.unwrap_or(Format::Json) {
            Format::Json => fs::write(p, serde_json::to_string_pretty(&rows)? + "\n")?,
            Format::Csv => {
                let header: Vec<String> =
                    ["map", "profile", "oracle", "integral", "residual", "pass"].map(String::from).to_vec();
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.map.clone(),
                            r.profile.label().to_string(),
                            r.oracle.to_string(),
                            fmt_num(r.integral),
                            fmt_num(r.residual),
                            r.pass.to_string(),
                        ]
                    })
                    .collect();
                emit_csv(&header, &body, Some(p))?;
            }
        }
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.map.as_str()).collect();
    if !failed.is_empty() {
        println!("{table}");
        return Err(CliError::Acceptance(failed.join(", ")));
    }
    Ok(Outcome { text: table, written: c.out.clone() })
}
