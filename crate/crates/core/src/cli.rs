//! Command-line front end: `pdf`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 2 usage or failed validation, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::extreme::{auto_grid, evaluate_curve, uniform_grid, DensityCurve, Extreme, AUTO_GRID_POINTS};
use crate::model::ModelParams;
use crate::quadrature::QuadSpec;
use crate::validation::{ks_critical_99, ks_statistic, max_histogram_deviation, sample_extreme_eigs};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
/// Default KS acceptance level; raised to the 99% critical value for small samples.
pub const DEFAULT_KS_THRESHOLD: f64 = 0.02;
pub const MIN_VALIDATION_SAMPLES: usize = 100;
pub const THREADS_ENV: &str = "WISHART_THREADS";

#[derive(Parser, Debug)]
#[command(name = "wishart", version, about = "Extreme-eigenvalue densities of real Wishart matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate density curves, one file per (extreme, M).
    Pdf(CommonArgs),
    /// Compare the analytic curve against Monte Carlo samples; writes a JSON report.
    Validate(ValidateArgs),
    /// Evaluate curves over a list of M into one long-format table.
    Sweep(CommonArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[arg(long, value_enum, default_value_t = WhichSel::Largest)]
    which: WhichSel,
    #[arg(long = "K")]
    k: usize,
    /// Comma-separated list.
    #[arg(long = "M", value_delimiter = ',', num_args = 1..)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = RhoMode::Fixed)]
    rho_mode: RhoMode,
    /// `min:max:points` or `auto`.
    #[arg(long, default_value = "auto")]
    grid: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Relative tolerance of the kernel-entry quadratures.
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
}

#[derive(Args, Debug, Clone)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// KS acceptance level (default: max(0.02, 1.63/sqrt(samples))).
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhichSel {
    Largest,
    Smallest,
    Both,
}

impl WhichSel {
    pub fn extremes(self) -> Vec<Extreme> {
        match self {
            WhichSel::Largest => vec![Extreme::Largest],
            WhichSel::Smallest => vec![Extreme::Smallest],
            WhichSel::Both => vec![Extreme::Largest, Extreme::Smallest],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum RhoMode {
    #[value(name = "fixed")]
    #[serde(rename = "fixed")]
    Fixed,
    #[value(name = "inverse-M")]
    #[serde(rename = "inverse-M")]
    InverseM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Auto,
    Uniform { min: f64, max: f64, points: usize },
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        if s.trim() == "auto" {
            return Ok(GridSpec::Auto);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Validation(format!("grid must be `min:max:points` or `auto`, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(min >= 0.0) || !max.is_finite() || !(max > min) {
            return Err(Error::Validation(format!("grid needs 0 <= min < max, got {min}:{max}")));
        }
        if points < 2 {
            return Err(Error::Validation(format!("grid needs at least 2 points, got {points}")));
        }
        Ok(GridSpec::Uniform { min, max, points })
    }
}

impl GridSpec {
    pub fn build(&self, which: Extreme, p: &ModelParams) -> crate::Result<Vec<f64>> {
        match *self {
            GridSpec::Auto => auto_grid(which, p, AUTO_GRID_POINTS),
            GridSpec::Uniform { min, max, points } => Ok(uniform_grid(min, max, points)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Pdf,
    Validate,
    Sweep,
}

/// Checked command-line configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub which: WhichSel,
    pub k: usize,
    pub m: Vec<usize>,
    pub rho: f64,
    pub rho_mode: RhoMode,
    pub grid: GridSpec,
    pub samples: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threshold: Option<f64>,
    pub rel_tol: f64,
}

impl RunConfig {
    fn from_common(command: CommandKind, a: CommonArgs) -> Result<Self, CliError> {
        let cfg = RunConfig {
            command,
            which: a.which,
            k: a.k,
            m: a.m,
            rho: a.rho,
            rho_mode: a.rho_mode,
            grid: a.grid.parse().map_err(CliError::from)?,
            samples: 0,
            seed: 0,
            output: a.output,
            format: a.format,
            threshold: None,
            rel_tol: a.rel_tol,
        };
        Ok(cfg)
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m.is_empty() {
            return Err(CliError::usage("--M needs at least one value"));
        }
        if self.k == 0 {
            return Err(CliError::usage("--K must be at least 1"));
        }
        if let Some(&m) = self.m.iter().find(|&&m| m <= self.k) {
            return Err(CliError::usage(format!("K < M is required for every M, got K={} M={m}", self.k)));
        }
        if self.rho_mode == RhoMode::Fixed && !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(CliError::usage(format!("--rho must be positive and finite, got {}", self.rho)));
        }
        QuadSpec::default().with_rel_tol(self.rel_tol).validate().map_err(CliError::from)?;
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(CliError::usage(format!("--threshold must lie in (0, 1], got {t}")));
            }
        }
        match self.command {
            CommandKind::Validate if self.m.len() != 1 => Err(CliError::usage("validate takes a single M")),
            CommandKind::Validate if self.samples == 0 => Err(CliError::usage("--samples must be at least 1")),
            CommandKind::Pdf if self.output.is_none() && self.curve_count() > 1 => {
                Err(CliError::usage("several curves requested; pass --output to name the files"))
            }
            _ => Ok(()),
        }
    }

    pub fn rho_for(&self, m: usize) -> f64 {
        match self.rho_mode {
            RhoMode::Fixed => self.rho,
            RhoMode::InverseM => 1.0 / m as f64,
        }
    }

    pub fn params_for(&self, m: usize) -> Result<ModelParams, CliError> {
        ModelParams::new(self.k, m, self.rho_for(m)).map_err(|e| CliError::usage(e.to_string()))
    }

    fn quad_spec(&self) -> QuadSpec {
        QuadSpec::default().with_rel_tol(self.rel_tol)
    }

    fn curve_count(&self) -> usize {
        self.m.len() * self.which.extremes().len()
    }
}

/// Failure carrying the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: msg.into() }
    }

    fn numerical(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Structural(_) | Error::Validation(_) | Error::Unsupported(_) => EXIT_USAGE,
            Error::NoConvergence { .. } | Error::Tolerance { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
        };
        CliError { code, message: e.to_string() }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("cannot write {}: {e}", path.display()))
}

/// One curve as written by `pdf --format json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub schema_version: u32,
    pub params: ModelParams,
    pub which: Extreme,
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub valid: Vec<bool>,
    pub warnings: Vec<String>,
}

impl From<&DensityCurve> for CurveDocument {
    fn from(c: &DensityCurve) -> Self {
        CurveDocument {
            schema_version: SCHEMA_VERSION,
            params: c.params,
            which: c.which,
            grid: c.grid.clone(),
            pdf: c.pdf.clone(),
            cdf: c.cdf.clone(),
            valid: c.valid.clone(),
            warnings: c.warnings.clone(),
        }
    }
}

impl CurveDocument {
    pub fn into_curve(self) -> crate::Result<DensityCurve> {
        let c = DensityCurve {
            which: self.which,
            params: self.params,
            grid: self.grid,
            pdf: self.pdf,
            cdf: self.cdf,
            valid: self.valid,
            warnings: self.warnings,
        };
        c.check_invariants()?;
        Ok(c)
    }
}

/// `lambda,pdf,cdf` table with 17 significant digits.
pub fn curve_to_csv(c: &DensityCurve) -> String {
    let mut out = String::from("lambda,pdf,cdf\n");
    for i in 0..c.grid.len() {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", c.grid[i], c.pdf[i], c.cdf[i]);
    }
    out
}

/// Parses [`curve_to_csv`] output back into a curve and checks its invariants.
pub fn curve_from_csv(text: &str, which: Extreme, params: ModelParams) -> crate::Result<DensityCurve> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "lambda,pdf,cdf" => {}
        other => return Err(Error::Structural(format!("unexpected CSV header {other:?}"))),
    }
    let (mut grid, mut pdf, mut cdf) = (Vec::new(), Vec::new(), Vec::new());
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Structural(format!("CSV row {}: {e}", no + 2)))?;
        if cols.len() != 3 {
            return Err(Error::Structural(format!("CSV row {} has {} columns", no + 2, cols.len())));
        }
        grid.push(cols[0]);
        pdf.push(cols[1]);
        cdf.push(cols[2]);
    }
    let valid = vec![true; grid.len()];
    let c = DensityCurve { which, params, grid, pdf, cdf, valid, warnings: Vec::new() };
    c.check_invariants()?;
    Ok(c)
}

/// Long-format `M,which,lambda,pdf,cdf` table.
pub fn sweep_to_csv(curves: &[DensityCurve]) -> String {
    let mut out = String::from("M,which,lambda,pdf,cdf\n");
    for c in curves {
        for i in 0..c.grid.len() {
            let _ =
                writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", c.params.m(), c.which, c.grid[i], c.pdf[i], c.cdf[i]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDocument {
    pub schema_version: u32,
    pub rho_mode: RhoMode,
    pub curves: Vec<CurveDocument>,
}

/// Monte Carlo validation report. Everything except `runtime_ms` is a
/// deterministic function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub params: ModelParams,
    pub which: Vec<Extreme>,
    pub grid: BTreeMap<Extreme, Vec<f64>>,
    pub pdf: BTreeMap<Extreme, Vec<f64>>,
    pub cdf: BTreeMap<Extreme, Vec<f64>>,
    pub ks: BTreeMap<Extreme, f64>,
    pub clipped_mass: BTreeMap<Extreme, f64>,
    /// Largest gap between histogram density and pdf at bin centers.
    pub max_pdf_deviation: BTreeMap<Extreme, f64>,
    pub samples: usize,
    pub threshold: f64,
    pub passed: bool,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub runtime_ms: u64,
}

/// Curve file name for one (extreme, M) when several curves are written.
pub fn curve_path(base: &Path, which: Extreme, m: usize, format: Format) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "curve".into());
    let ext =
        base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| format.extension().to_string());
    base.with_file_name(format!("{stem}_{which}_M{m}.{ext}"))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::numerical(format!("cannot serialize output: {e}")))
}

fn compute_curves(cfg: &RunConfig) -> Result<Vec<DensityCurve>, CliError> {
    let spec = cfg.quad_spec();
    let mut curves = Vec::with_capacity(cfg.curve_count());
    for &m in &cfg.m {
        let p = cfg.params_for(m)?;
        for which in cfg.which.extremes() {
            let grid = cfg.grid.build(which, &p)?;
            curves.push(evaluate_curve(which, &grid, &p, &spec)?);
        }
    }
    Ok(curves)
}

fn numerical_status(curves: &[DensityCurve]) -> Result<(), CliError> {
    let failed: usize = curves.iter().map(|c| c.valid.iter().filter(|v| !**v).count()).sum();
    if failed > 0 {
        return Err(CliError::numerical(format!("{failed} grid point(s) failed to evaluate; see warnings")));
    }
    Ok(())
}

pub fn cmd_pdf(cfg: &RunConfig) -> Result<(), CliError> {
    let curves = compute_curves(cfg)?;
    let single = curves.len() == 1;
    for c in &curves {
        let text = match cfg.format {
            Format::Csv => curve_to_csv(c),
            Format::Json => to_json(&CurveDocument::from(c))?,
        };
        let path = match (&cfg.output, single) {
            (Some(p), true) => Some(p.clone()),
            (Some(p), false) => Some(curve_path(p, c.which, c.params.m(), cfg.format)),
            (None, _) => None,
        };
        emit(path.as_deref(), &text)?;
    }
    numerical_status(&curves)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let curves = compute_curves(cfg)?;
    let text = match cfg.format {
        Format::Csv => sweep_to_csv(&curves),
        Format::Json => to_json(&SweepDocument {
            schema_version: SCHEMA_VERSION,
            rho_mode: cfg.rho_mode,
            curves: curves.iter().map(CurveDocument::from).collect(),
        })?,
    };
    emit(cfg.output.as_deref(), &text)?;
    numerical_status(&curves)
}

/// Acceptance level used by `validate`.
pub fn ks_threshold(samples: usize, requested: Option<f64>) -> f64 {
    requested.unwrap_or_else(|| DEFAULT_KS_THRESHOLD.max(ks_critical_99(samples)))
}

/// Runs the validation and returns the report; does not write anything.
pub fn build_validation_report(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    let start = Instant::now();
    let p = cfg.params_for(cfg.m[0])?;
    let spec = cfg.quad_spec();
    let threshold = ks_threshold(cfg.samples, cfg.threshold);
    let mut report = ValidationReport {
        schema_version: SCHEMA_VERSION,
        params: p,
        which: cfg.which.extremes(),
        grid: BTreeMap::new(),
        pdf: BTreeMap::new(),
        cdf: BTreeMap::new(),
        ks: BTreeMap::new(),
        clipped_mass: BTreeMap::new(),
        max_pdf_deviation: BTreeMap::new(),
        samples: cfg.samples,
        threshold,
        passed: true,
        flags: Vec::new(),
        warnings: Vec::new(),
        seed: cfg.seed,
        runtime_ms: 0,
    };
    if cfg.samples < MIN_VALIDATION_SAMPLES {
        report.flags.push("insufficient-samples".into());
        report.passed = false;
    }
    let bins = ((cfg.samples as f64).sqrt() as usize).clamp(10, 100);
    for which in cfg.which.extremes() {
        let grid = cfg.grid.build(which, &p)?;
        let curve = evaluate_curve(which, &grid, &p, &spec)?;
        let sample = sample_extreme_eigs(&p, cfg.samples, cfg.seed, which)?;
        let ks = ks_statistic(&sample, &curve)?;
        let dev = max_histogram_deviation(&sample, &curve, bins)?;
        if !(ks.statistic < threshold) {
            report.passed = false;
            report.flags.push(format!("ks-exceeded-{which}"));
        }
        if curve.valid.iter().any(|v| !v) {
            report.passed = false;
            report.flags.push(format!("evaluation-failed-{which}"));
        }
        if sample.retries > 0 {
            report.warnings.push(format!("{which}: {} eigen-solver retries", sample.retries));
        }
        if ks.clipped_mass > 0.0 {
            report.warnings.push(format!("{which}: sample mass {:.3e} lies outside the grid", ks.clipped_mass));
        }
        report.warnings.extend(curve.warnings.iter().map(|w| format!("{which}: {w}")));
        report.ks.insert(which, ks.statistic);
        report.clipped_mass.insert(which, ks.clipped_mass);
        report.max_pdf_deviation.insert(which, dev);
        report.grid.insert(which, curve.grid);
        report.pdf.insert(which, curve.pdf);
        report.cdf.insert(which, curve.cdf);
    }
    report.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let report = build_validation_report(cfg)?;
    emit(cfg.output.as_deref(), &to_json(&report)?)?;
    for (which, ks) in &report.ks {
        eprintln!("{which}: KS = {ks:.5} (threshold {:.5})", report.threshold);
    }
    if report.passed {
        Ok(())
    } else {
        Err(CliError::usage(format!("validation failed: {}", report.flags.join(", "))))
    }
}

/// Parses `args` (including the program name) into a checked configuration.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let cfg = match cli.command {
        Command::Pdf(a) => RunConfig::from_common(CommandKind::Pdf, a),
        Command::Sweep(a) => RunConfig::from_common(CommandKind::Sweep, a),
        Command::Validate(v) => RunConfig::from_common(CommandKind::Validate, v.common).map(|mut c| {
            c.samples = v.samples;
            c.seed = v.seed;
            c.threshold = v.threshold;
            c
        }),
    };
    cfg.map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{}\n", e.message)))
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let raw = match std::env::var(THREADS_ENV) {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be an integer >= 1, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::numerical(format!("cannot start thread pool: {e}")))
}

pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let run = || match cfg.command {
        CommandKind::Pdf => cmd_pdf(cfg),
        CommandKind::Validate => cmd_validate(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
    };
    match thread_pool()? {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

/// Entry point of the `wishart` binary; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        parse_config(std::iter::once("wishart").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_spec_parsing() {
        assert_eq!("auto".parse::<GridSpec>().unwrap(), GridSpec::Auto);
        assert_eq!("0:30:400".parse::<GridSpec>().unwrap(), GridSpec::Uniform { min: 0.0, max: 30.0, points: 400 });
        for bad in ["0:30", "-1:3:10", "3:1:10", "0:1:1", "a:b:c", "0:inf:10"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn config_from_flags() {
        let c = cfg(&["sweep", "--K", "51", "--M", "300,500,700", "--rho-mode", "inverse-M", "--which", "largest"]);
        assert_eq!(c.command, CommandKind::Sweep);
        assert_eq!(c.m, vec![300, 500, 700]);
        assert_eq!(c.rho_mode, RhoMode::InverseM);
        assert!((c.rho_for(500) - 0.002).abs() < 1e-18);
        c.validate().unwrap();
    }

    #[test]
    fn invariants_rejected_with_usage_code() {
        let e = cfg(&["pdf", "--K", "5", "--M", "4"]).validate().unwrap_err();
        assert_eq!(e.code, EXIT_USAGE);
        assert!(e.message.contains("K < M"));
        let e = cfg(&["validate", "--K", "2", "--M", "3,4"]).validate().unwrap_err();
        assert_eq!(e.code, EXIT_USAGE);
        assert!(cfg(&["pdf", "--K", "2", "--M", "3,4"]).validate().is_err());
        assert!(cfg(&["pdf", "--K", "2", "--M", "3", "--rho", "0"]).validate().is_err());
        let mut c = cfg(&["sweep", "--K", "2", "--M", "3"]);
        c.m.clear();
        assert_eq!(c.validate().unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(ks_threshold(10_000, None), 0.02);
        assert!((ks_threshold(10, None) - 1.63 / 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(ks_threshold(10, Some(0.1)), 0.1);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let p = ModelParams::new(2, 4, 1.0).unwrap();
        let c = evaluate_curve(Extreme::Largest, &uniform_grid(0.0, 25.0, 120), &p, &QuadSpec::default()).unwrap();
        let back = curve_from_csv(&curve_to_csv(&c), Extreme::Largest, p).unwrap();
        assert_eq!(back.grid, c.grid);
        assert_eq!(back.pdf, c.pdf);
        assert_eq!(back.cdf, c.cdf);
        assert!(curve_from_csv("x,y\n", Extreme::Largest, p).is_err());
        assert!(curve_from_csv("lambda,pdf,cdf\n1,2\n", Extreme::Largest, p).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = ModelParams::new(1, 3, 2.0).unwrap();
        let c = evaluate_curve(Extreme::Smallest, &uniform_grid(0.0, 80.0, 300), &p, &QuadSpec::default()).unwrap();
        let doc: CurveDocument = serde_json::from_str(&to_json(&CurveDocument::from(&c)).unwrap()).unwrap();
        assert_eq!(doc.schema_version, SCHEMA_VERSION);
        assert_eq!(doc.into_curve().unwrap(), c);
    }

    #[test]
    fn output_naming() {
        let p = curve_path(Path::new("/tmp/out/run.csv"), Extreme::Smallest, 700, Format::Csv);
        assert_eq!(p, PathBuf::from("/tmp/out/run_smallest_M700.csv"));
        let p = curve_path(Path::new("run"), Extreme::Largest, 5, Format::Json);
        assert_eq!(p, PathBuf::from("run_largest_M5.json"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Validation("x".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(Error::Numerical("x".into())).code, EXIT_NUMERICAL);
        assert_eq!(CliError::from(Error::Tolerance { value: 0.0, err_est: 1.0 }).code, EXIT_NUMERICAL);
    }

    #[test]
    fn report_flags_small_samples() {
        let mut c = cfg(&["validate", "--K", "2", "--M", "4", "--samples", "10", "--grid", "0:40:400"]);
        c.validate().unwrap();
        let r = build_validation_report(&c).unwrap();
        assert!(!r.passed);
        assert!(r.flags.iter().any(|f| f == "insufficient-samples"));
        assert!((r.threshold - 1.63 / 10f64.sqrt()).abs() < 1e-15);
        c.samples = 2000;
        let r = build_validation_report(&c).unwrap();
        assert!(r.passed, "{:?}", r.flags);
    }
}
