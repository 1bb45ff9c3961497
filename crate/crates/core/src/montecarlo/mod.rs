//! Monte Carlo estimates of the expected number of crossings, with exact
//! per-sample root counts.

mod scan;
mod sturm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoefficientModel, ModelError};
use sturm::{IntPoly, Probe, SturmChain};

/// Largest degree for which [`CountingMode::ExactSturm`] is accepted.
pub const MAX_STURM_DEGREE: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("interval ({lo}, {hi}) is empty or not ordered")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("intervals ({0}, {1}) and ({2}, {3}) overlap")]
    OverlappingIntervals(f64, f64, f64, f64),
    #[error("exact Sturm counting is limited to degree {MAX_STURM_DEGREE}, got {0}")]
    SturmDegreeLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CountingMode {
    /// Exact distinct-root count in integer arithmetic.
    ExactSturm,
    /// Sign changes on a refined grid; never exceeds the true count.
    SignScan,
}

/// Open interval of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::extreal")]
    pub lo: f64,
    #[serde(with = "crate::extreal")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SimulationError> {
        if lo < hi && !lo.is_nan() && !hi.is_nan() && lo != f64::INFINITY && hi != f64::NEG_INFINITY {
            Ok(Interval { lo, hi })
        } else {
            Err(SimulationError::EmptyInterval { lo, hi })
        }
    }

    pub const WHOLE_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
}

/// `(−∞, −1), (−1, 0), (0, 1), (1, ∞)`.
pub fn default_intervals() -> Vec<Interval> {
    let cuts = [f64::NEG_INFINITY, -1.0, 0.0, 1.0, f64::INFINITY];
    cuts.windows(2).map(|w| Interval { lo: w[0], hi: w[1] }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: CoefficientModel,
    pub trials: u64,
    pub seed: u64,
    pub intervals: Vec<Interval>,
    pub mode: CountingMode,
}

impl SimulationConfig {
    /// Default intervals and exact counting.
    pub fn new(model: CoefficientModel, trials: u64, seed: u64) -> Self {
        SimulationConfig {
            model,
            trials,
            seed,
            intervals: default_intervals(),
            mode: CountingMode::ExactSturm,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(SimulationError::NoTrials);
        }
        for iv in &self.intervals {
            Interval::new(iv.lo, iv.hi)?;
        }
        let mut sorted = self.intervals.clone();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in sorted.windows(2) {
            if w[0].hi > w[1].lo {
                return Err(SimulationError::OverlappingIntervals(
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi,
                ));
            }
        }
        if self.mode == CountingMode::ExactSturm && self.model.degree() > MAX_STURM_DEGREE {
            return Err(SimulationError::SturmDegreeLimit(self.model.degree()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub intervals: Vec<Interval>,
    pub per_interval_mean: Vec<f64>,
    pub per_interval_stderr: Vec<f64>,
    pub total_mean: f64,
    pub total_stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: CountingMode,
}

/// The generator for one trial: ChaCha8 keyed by the run seed, on the
/// stream numbered by the trial index. Trials never share a stream, so how
/// trials are spread across workers cannot change what each one draws.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Standard normal pairs by Box–Muller on 53-bit uniforms, with `libm`
/// transcendental functions so results do not depend on the platform.
pub struct GaussianStream<'a, R: Rng> {
    rng: &'a mut R,
    spare: Option<f64>,
}

impl<'a, R: Rng> GaussianStream<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        GaussianStream { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

/// Draws `A_0, …, A_n` as partial sums of independent `N(0, σ_k²)` steps.
pub fn sample_coefficients<R: Rng>(model: &CoefficientModel, rng: &mut R) -> Vec<f64> {
    let mut normals = GaussianStream::new(rng);
    let mut acc = 0.0;
    model
        .sigma()
        .iter()
        .map(|&s| {
            acc += s * normals.next_normal();
            acc
        })
        .collect()
}

/// Coefficients of `Σ A_j x^j − Kx`.
fn crossing_poly(coeffs: &[f64], slope: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    if c.len() > 1 {
        c[1] -= slope;
    }
    c
}

/// An exact integer copy of `Σ A_j x^j − Kx`; `A_1 − K` is formed exactly.
fn exact_crossing_poly(coeffs: &[f64], slope: f64) -> IntPoly {
    let mut c: Vec<[f64; 2]> = coeffs.iter().map(|&v| [v, 0.0]).collect();
    if c.len() > 1 {
        // A_1 − K need not be a double; keep it as an exact pair.
        let (hi, lo) = crate::numeric::two_sum(coeffs[1], -slope);
        c[1] = [hi, lo];
    }
    IntPoly::from_f64_sums(&c)
}

fn probe(v: f64, right: bool) -> Probe {
    if v.is_infinite() {
        Probe::Infinite { positive: v > 0.0 }
    } else {
        Probe::Finite { v, right }
    }
}

/// Number of distinct real roots of `Σ A_j x^j − Kx` in the open interval.
pub fn count_real_roots(
    coeffs: &[f64],
    slope: f64,
    interval: Interval,
    mode: CountingMode,
) -> Result<usize, SimulationError> {
    Ok(Counter::new(coeffs, slope, mode)?.open(interval))
}

/// Root counting for one sampled polynomial over several intervals.
enum Counter {
    Exact(SturmChain),
    Scan(Vec<f64>),
}

impl Counter {
    fn new(coeffs: &[f64], slope: f64, mode: CountingMode) -> Result<Self, SimulationError> {
        let poly = crossing_poly(coeffs, slope);
        if poly.iter().all(|&c| c == 0.0) {
            return Err(SimulationError::ZeroPolynomial);
        }
        Ok(match mode {
            CountingMode::ExactSturm => Counter::Exact(SturmChain::new(exact_crossing_poly(coeffs, slope))),
            CountingMode::SignScan => Counter::Scan(poly),
        })
    }

    fn open(&self, iv: Interval) -> usize {
        match self {
            Counter::Exact(chain) => chain.count(probe(iv.lo, true), probe(iv.hi, false)),
            Counter::Scan(poly) => scan::count(poly, iv.lo, iv.hi),
        }
    }

    fn is_root(&self, v: f64) -> bool {
        match self {
            Counter::Exact(chain) => chain.is_root(v),
            Counter::Scan(poly) => scan::eval(poly, v) == 0.0,
        }
    }
}

/// Per-trial counts, with a root exactly on a shared boundary credited to
/// the interval on its right.
fn trial_counts(config: &SimulationConfig, trial: u64) -> Result<Vec<u64>, SimulationError> {
    let mut rng = trial_rng(config.seed, trial);
    let coeffs = sample_coefficients(&config.model, &mut rng);
    let counter = Counter::new(&coeffs, config.model.slope(), config.mode)?;
    let ivs = &config.intervals;
    Ok(ivs
        .iter()
        .map(|iv| {
            let mut c = counter.open(*iv) as u64;
            let shared = iv.lo.is_finite() && ivs.iter().any(|o| o.hi == iv.lo);
            if shared && counter.is_root(iv.lo) {
                c += 1;
            }
            c
        })
        .collect())
}

/// Exact running sums of counts and squared counts.
#[derive(Debug, Clone, Default)]
struct Tally {
    sums: Vec<u64>,
    squares: Vec<u64>,
    total_sum: u64,
    total_squares: u64,
}

impl Tally {
    fn of(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        Tally {
            squares: counts.iter().map(|c| c * c).collect(),
            sums: counts,
            total_sum: total,
            total_squares: total * total,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if self.sums.is_empty() {
            return other;
        }
        if other.sums.is_empty() {
            return self;
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.squares.iter_mut().zip(&other.squares) {
            *a += b;
        }
        self.total_sum += other.total_sum;
        self.total_squares += other.total_squares;
        self
    }
}

/// Standard error of the mean from exact integer moments.
fn stderr(sum: u64, squares: u64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let (sum, squares, n) = (sum as u128, squares as u128, n as u128);
    // n·Σx² − (Σx)² is an exact non-negative integer.
    let spread = n * squares - sum * sum;
    (spread as f64 / (n as f64 * n as f64 * (n - 1) as f64)).sqrt()
}

/// Runs the trials in parallel and reduces them exactly, so the report is
/// the same for any number of worker threads.
pub fn estimate(config: &SimulationConfig) -> Result<SimulationReport, SimulationError> {
    config.validate()?;
    let tally = (0..config.trials)
        .into_par_iter()
        .map(|trial| trial_counts(config, trial).map(Tally::of))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    let n = config.trials;
    let per_interval_mean: Vec<f64> = tally.sums.iter().map(|&s| s as f64 / n as f64).collect();
    let per_interval_stderr = tally
        .sums
        .iter()
        .zip(&tally.squares)
        .map(|(&s, &q)| stderr(s, q, n))
        .collect();
    Ok(SimulationReport {
        intervals: config.intervals.clone(),
        total_mean: per_interval_mean.iter().sum(),
        per_interval_mean,
        per_interval_stderr,
        total_stderr: stderr(tally.total_sum, tally.total_squares, n),
        trials: n,
        seed: config.seed,
        mode: config.mode,
    })
}
