//! Command-line front end. Every subcommand prints one table, either as a
//! JSON envelope `{meta, data}` or as CSV with a header row.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{self, AsymptoticError, Parity, Regime};
use crate::density::{self, DensityError, DensitySample, IntervalCount};
use crate::model::{CoefficientModel, ModelError};
use crate::montecarlo::{self, CountingMode, SimulationConfig, SimulationError, MAX_STURM_DEGREE};

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "CROSSING_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "crossing-lab",
    version,
    about = "Real crossings of random walk polynomials with a line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output encoding.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Polynomial degree.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Slope of the line.
    #[arg(long, allow_hyphen_values = true)]
    k: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    N14,
    N12,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParityArg {
    Odd,
    Even,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    ExactSturm,
    SignScan,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the crossing density on a grid.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
        x_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 3.0)]
        x_max: f64,
        #[arg(long, default_value_t = 121)]
        points: usize,
    },
    /// Expected crossings by quadrature.
    Expect {
        #[command(flatten)]
        model: ModelArgs,
        /// Left endpoint; accepts `-inf`.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// Right endpoint; accepts `inf`.
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Terms of the large-degree formula.
    Asym {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = RegimeArg::N14)]
        regime: RegimeArg,
        /// Use this parity constant instead of the degree's own.
        #[arg(long, value_enum)]
        parity: Option<ParityArg>,
    },
    /// Recompute the formula constants and compare with the printed values.
    Constants,
    /// Monte Carlo root counts.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Counting method; exact up to degree 60, sign scan above.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Quadrature, formula and Monte Carlo side by side.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = RegimeArg::N14)]
        regime: RegimeArg,
        #[arg(long, value_enum)]
        parity: Option<ParityArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Directory for the density and growth series.
        #[arg(long)]
        emit_curves: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {flag}: {reason}")]
    Usage { flag: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("encoding failed: {0}")]
    Encode(String),
}

impl CliError {
    fn usage(flag: &'static str, reason: impl Into<String>) -> Self {
        CliError::Usage {
            flag,
            reason: reason.into(),
        }
    }

    /// 1 for bad input, 2 for numerical failure, 3 for a broken invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } | CliError::Model(_) | CliError::Io { .. } => 1,
            CliError::Density(e) => match e {
                DensityError::Model(_) | DensityError::InvalidInterval { .. } | DensityError::InvalidTolerance(_) => 1,
                DensityError::ToleranceNotReached { .. }
                | DensityError::DegenerateMoment { .. }
                | DensityError::NonFiniteDensity { .. } => 2,
            },
            CliError::Asymptotic(e) => match e {
                AsymptoticError::ToleranceNotReached { .. } => 2,
                AsymptoticError::ZeroDegree => 1,
                AsymptoticError::Domain(_) => 3,
            },
            CliError::Simulation(e) => match e {
                SimulationError::ZeroPolynomial => 3,
                _ => 1,
            },
            CliError::Encode(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
}

/// The JSON document every subcommand produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub meta: Meta,
    pub data: Vec<T>,
}

/// One interval of a Monte Carlo report; the last row covers the whole line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    #[serde(with = "crate::extreal")]
    pub lo: f64,
    #[serde(with = "crate::extreal")]
    pub hi: f64,
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub mode: CountingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: usize,
    pub k: f64,
    pub quadrature: f64,
    pub quadrature_error: f64,
    pub asymptotic: f64,
    pub monte_carlo: f64,
    pub mc_stderr: f64,
    pub diff_quadrature_asymptotic: f64,
    pub diff_quadrature_monte_carlo: f64,
    pub diff_asymptotic_monte_carlo: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub fn_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub n: usize,
    pub expected: f64,
}

pub const WITHIN: &str = "within 3σ";
pub const OUTSIDE: &str = "outside 3σ";

/// Parses `args` (program name first), runs the command and writes the
/// table to `stdout` or `--out`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => 1,
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::usage(THREADS_ENV, format!("expected a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Encode(e.to_string()))
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let pool = worker_pool()?;
    let (text, curves) = pool.install(|| render(cli))?;
    if let Some((dir, density, growth)) = curves {
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let ext = cli.format.extension();
        write_file(&dir.join(format!("density.{ext}")), &density)?;
        write_file(&dir.join(format!("growth.{ext}")), &growth)?;
    }
    match &cli.out {
        Some(path) => write_file(path, &text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn finite(flag: &'static str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(flag, format!("must be finite, got {v}")))
    }
}

fn positive_tol(v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(
            "--tol",
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl ModelArgs {
    fn validate(&self) -> Result<(usize, f64), CliError> {
        let n = usize::try_from(self.n).map_err(|_| CliError::usage("--n", "too large"))?;
        Ok((n, finite("--k", self.k)?))
    }
}

fn regime(r: RegimeArg) -> Regime {
    match r {
        RegimeArg::N14 => Regime::QuarterPower,
        RegimeArg::N12 => Regime::HalfPower,
    }
}

fn parity(p: Option<ParityArg>, n: usize) -> Parity {
    match p {
        Some(ParityArg::Odd) => Parity::Odd,
        Some(ParityArg::Even) => Parity::Even,
        None => Parity::of(n),
    }
}

fn counting_mode(mode: Option<ModeArg>, n: usize) -> Result<CountingMode, CliError> {
    match mode {
        Some(ModeArg::ExactSturm) if n > MAX_STURM_DEGREE => Err(CliError::usage(
            "--mode",
            format!("exact-sturm supports degree up to {MAX_STURM_DEGREE}"),
        )),
        Some(ModeArg::ExactSturm) => Ok(CountingMode::ExactSturm),
        Some(ModeArg::SignScan) => Ok(CountingMode::SignScan),
        None if n <= MAX_STURM_DEGREE => Ok(CountingMode::ExactSturm),
        None => Ok(CountingMode::SignScan),
    }
}

fn positive_trials(t: u64) -> Result<u64, CliError> {
    if t == 0 {
        Err(CliError::usage("--trials", "at least one trial is required"))
    } else {
        Ok(t)
    }
}

type Rendered = (String, Option<(PathBuf, String, String)>);

fn render(cli: &Cli) -> Result<Rendered, CliError> {
    let fmt = cli.format;
    let meta = |command: &str, seed: Option<u64>| Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed,
    };
    let text = match &cli.command {
        Command::Density {
            model,
            x_min,
            x_max,
            points,
        } => {
            let (n, k) = model.validate()?;
            let (lo, hi) = (finite("--x-min", *x_min)?, finite("--x-max", *x_max)?);
            if lo >= hi {
                return Err(CliError::usage("--x-max", format!("must exceed --x-min ({lo})")));
            }
            if *points < 2 {
                return Err(CliError::usage("--points", "at least two points are required"));
            }
            let m = CoefficientModel::brownian(n, k)?;
            let rows = density_table(&m, lo, hi, *points)?;
            encode(fmt, meta("density", None), &rows)?
        }
        Command::Expect { model, a, b, tol } => {
            let (n, k) = model.validate()?;
            let tol = positive_tol(*tol)?;
            let m = CoefficientModel::brownian(n, k)?;
            let rows = match (a, b) {
                (Some(a), Some(b)) => {
                    if a.is_nan() || b.is_nan() || a >= b {
                        return Err(CliError::usage("--b", format!("must exceed --a ({a})")));
                    }
                    vec![density::expected_crossings(&m, *a, *b, tol)?]
                }
                (None, None) => expect_table(&m, tol)?,
                (Some(_), None) => return Err(CliError::usage("--b", "required together with --a")),
                (None, Some(_)) => return Err(CliError::usage("--a", "required together with --b")),
            };
            encode(fmt, meta("expect", None), &rows)?
        }
        Command::Asym {
            model,
            regime: r,
            parity: p,
        } => {
            let (n, k) = model.validate()?;
            let report = asymptotics::theorem_formula_with_parity(n, k, regime(*r), parity(*p, n))?;
            encode(fmt, meta("asym", None), &[report])?
        }
        Command::Constants => {
            let audit = asymptotics::constant_audit();
            encode(fmt, meta("constants", None), &audit.rows)?
        }
        Command::Mc {
            model,
            trials,
            seed,
            mode,
        } => {
            let (n, k) = model.validate()?;
            let trials = positive_trials(*trials)?;
            let mode = counting_mode(*mode, n)?;
            let config = SimulationConfig {
                mode,
                ..SimulationConfig::new(CoefficientModel::brownian(n, k)?, trials, *seed)
            };
            let rows = mc_table(&montecarlo::estimate(&config)?);
            encode(fmt, meta("mc", Some(*seed)), &rows)?
        }
        Command::Compare {
            model,
            trials,
            seed,
            tol,
            regime: r,
            parity: p,
            mode,
            emit_curves,
        } => {
            let (n, k) = model.validate()?;
            let trials = positive_trials(*trials)?;
            let tol = positive_tol(*tol)?;
            let mode = counting_mode(*mode, n)?;
            let m = CoefficientModel::brownian(n, k)?;
            let row = compare(&m, trials, *seed, tol, regime(*r), parity(*p, n), mode)?;
            let text = encode(fmt, meta("compare", Some(*seed)), &[row])?;
            let curves = match emit_curves {
                Some(dir) => {
                    let density: Vec<CurvePoint> = density_table(&m, -3.0, 3.0, 121)?
                        .into_iter()
                        .map(|s| CurvePoint {
                            x: s.x,
                            fn_value: s.fn_value,
                        })
                        .collect();
                    let growth = growth_table(n, k, tol)?;
                    Some((
                        dir.clone(),
                        encode(fmt, meta("compare", Some(*seed)), &density)?,
                        encode(fmt, meta("compare", Some(*seed)), &growth)?,
                    ))
                }
                None => None,
            };
            return Ok((text, curves));
        }
    };
    Ok((text, None))
}

/// `points` evenly spaced samples from `lo` to `hi` inclusive.
pub fn density_table(
    model: &CoefficientModel,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<DensitySample>, CliError> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let x = if i + 1 == points { hi } else { lo + step * i as f64 };
            density::density_at(model, x).map_err(CliError::from)
        })
        .collect()
}

/// The four default intervals followed by their total over the whole line.
pub fn expect_table(model: &CoefficientModel, tol: f64) -> Result<Vec<IntervalCount>, CliError> {
    let mut rows = montecarlo::default_intervals()
        .iter()
        .map(|iv| density::expected_crossings(model, iv.lo, iv.hi, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let total = IntervalCount {
        a: f64::NEG_INFINITY,
        b: f64::INFINITY,
        expected: rows.iter().map(|r| r.expected).sum(),
        abs_error_estimate: rows.iter().map(|r| r.abs_error_estimate).sum(),
    };
    rows.push(total);
    Ok(rows)
}

pub fn mc_table(report: &montecarlo::SimulationReport) -> Vec<McRow> {
    let row = |lo, hi, mean, stderr| McRow {
        lo,
        hi,
        mean,
        stderr,
        trials: report.trials,
        mode: report.mode,
    };
    let mut rows: Vec<McRow> = report
        .intervals
        .iter()
        .zip(report.per_interval_mean.iter().zip(&report.per_interval_stderr))
        .map(|(iv, (&m, &s))| row(iv.lo, iv.hi, m, s))
        .collect();
    rows.push(row(
        f64::NEG_INFINITY,
        f64::INFINITY,
        report.total_mean,
        report.total_stderr,
    ));
    rows
}

/// Quadrature and simulation agree when they differ by at most three
/// standard errors plus the quadrature's own error estimate.
pub fn compare(
    model: &CoefficientModel,
    trials: u64,
    seed: u64,
    tol: f64,
    regime: Regime,
    parity: Parity,
    mode: CountingMode,
) -> Result<CompareRow, CliError> {
    let quad = density::expected_crossings(model, f64::NEG_INFINITY, f64::INFINITY, tol)?;
    let asym = asymptotics::theorem_formula_with_parity(model.degree(), model.slope(), regime, parity)?;
    let config = SimulationConfig {
        mode,
        ..SimulationConfig::new(model.clone(), trials, seed)
    };
    let mc = montecarlo::estimate(&config)?;
    let diff_qm = (quad.expected - mc.total_mean).abs();
    let within = diff_qm <= 3.0 * mc.total_stderr + quad.abs_error_estimate;
    Ok(CompareRow {
        n: model.degree(),
        k: model.slope(),
        quadrature: quad.expected,
        quadrature_error: quad.abs_error_estimate,
        asymptotic: asym.total,
        monte_carlo: mc.total_mean,
        mc_stderr: mc.total_stderr,
        diff_quadrature_asymptotic: (quad.expected - asym.total).abs(),
        diff_quadrature_monte_carlo: diff_qm,
        diff_asymptotic_monte_carlo: (asym.total - mc.total_mean).abs(),
        verdict: if within { WITHIN } else { OUTSIDE }.to_string(),
    })
}

/// Whole-line expectation at degrees 1, 2, 4, … up to `n`, ending at `n`.
pub fn growth_table(n: usize, k: f64, tol: f64) -> Result<Vec<GrowthPoint>, CliError> {
    let mut degrees: Vec<usize> = std::iter::successors(Some(1usize), |d| d.checked_mul(2))
        .take_while(|&d| d < n)
        .collect();
    degrees.push(n);
    degrees
        .into_iter()
        .map(|d| {
            let m = CoefficientModel::brownian(d, k)?;
            let q = density::expected_crossings(&m, f64::NEG_INFINITY, f64::INFINITY, tol)?;
            Ok(GrowthPoint {
                n: d,
                expected: q.expected,
            })
        })
        .collect()
}

/// JSON envelope or CSV table. Both print floats as the shortest decimal
/// that reads back to the same double, so the two formats carry identical
/// values.
pub fn encode<T: Serialize>(format: Format, meta: Meta, rows: &[T]) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let doc = Envelope {
                meta,
                data: rows.iter().collect(),
            };
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Encode(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| CliError::Encode(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Encode(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Encode(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests;
