//! Seeded Monte Carlo harness.
//!
//! Three experiments live here: the throughput sweep over arrival-rate
//! standard deviation (lower bound, optimum, upper bound), the feasibility
//! trend of the two transmission schemes as the blocklength grows, and a
//! plain batch of scheme simulations for the CLI.
//!
//! Trial `t` of an experiment with base seed `b` draws its random streams
//! from `seed::derive(b, stream, t)`. Trials run in parallel on the current
//! rayon pool and are reduced in trial order, so results do not depend on
//! the number of worker threads.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::allocation::{self, ThroughputReport};
use crate::arrivals::{generate_slot_profile, generate_trace, ArrivalSpec, MeanStdFamily};
use crate::coding::{self, Scheme};
use crate::energy_ledger::{self, BatteryState, HarvestTiming, DEFAULT_TOLERANCE};
use crate::numeric::mean_and_se;
use crate::seed::{self, stream};
use crate::{Error, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance block attached to every JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta<S> {
    pub artifact_version: String,
    pub base_seed: u64,
    pub spec: S,
}

impl<S> Meta<S> {
    fn new(base_seed: u64, spec: S) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            base_seed,
            spec,
        }
    }
}

// ---------------------------------------------------------------------------
// Throughput sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub slots: usize,
    pub mean: f64,
    pub std_values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub family: MeanStdFamily,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::Parameter("slot count must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be >= 1".into()));
        }
        if !(self.mean.is_finite() && self.mean >= 0.0) {
            return Err(Error::Parameter(format!("mean must be >= 0, got {}", self.mean)));
        }
        for std in &self.std_values {
            ArrivalSpec::with_mean_and_std(self.family, self.mean, *std)?;
        }
        Ok(())
    }
}

/// One sweep point; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub std: f64,
    pub trials: usize,
    pub t_lb_mean: f64,
    pub t_lb_se: f64,
    pub t_opt_mean: f64,
    pub t_opt_se: f64,
    pub t_ub_mean: f64,
    pub t_ub_se: f64,
}

pub const SWEEP_CSV_HEADER: [&str; 8] = [
    "std", "trials", "t_lb_mean", "t_lb_se", "t_opt_mean", "t_opt_se", "t_ub_mean", "t_ub_se",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub meta: Meta<SweepSpec>,
    pub points: Vec<SweepPoint>,
}

/// Per-trial throughputs at one standard deviation. Trial `t` uses the same
/// slot seed at every sweep point.
pub fn sweep_trials(spec: &SweepSpec, std: f64) -> Result<Vec<ThroughputReport>> {
    let arrivals = ArrivalSpec::with_mean_and_std(spec.family, spec.mean, std)?;
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| {
            let profile = generate_slot_profile(&arrivals, spec.slots, seed::derive(spec.base_seed, stream::SLOTS, t))?;
            Ok(allocation::throughput_report(&profile))
        })
        .collect()
}

pub fn run_fig5_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec
        .std_values
        .iter()
        .map(|&std| {
            let reports = sweep_trials(spec, std)?;
            let stat = |f: fn(&ThroughputReport) -> f64| mean_and_se(&reports.iter().map(f).collect::<Vec<_>>());
            let (t_lb_mean, t_lb_se) = stat(|r| r.t_lb);
            let (t_opt_mean, t_opt_se) = stat(|r| r.t_opt);
            let (t_ub_mean, t_ub_se) = stat(|r| r.t_ub);
            Ok(SweepPoint {
                std,
                trials: spec.trials,
                t_lb_mean,
                t_lb_se,
                t_opt_mean,
                t_opt_se,
                t_ub_mean,
                t_ub_se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        meta: Meta::new(spec.base_seed, spec.clone()),
        points,
    })
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_table(&SWEEP_CSV_HEADER, &self.points, out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        save_table(&SWEEP_CSV_HEADER, &self.points, path)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>> {
    read_table(path)
}

// ---------------------------------------------------------------------------
// Feasibility trend
// ---------------------------------------------------------------------------

/// Law of the per-channel-use symbol energy `X_i^2` outside the prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolModel {
    /// `X_i ~ N(0, variance)`, drawn as a one-codeword codebook.
    Gaussian { variance: f64 },
    /// `X_i^2 = energy` deterministically.
    Constant { energy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTrendSpec {
    pub scheme: Scheme,
    pub arrivals: ArrivalSpec,
    pub symbols: SymbolModel,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub timing: HarvestTiming,
}

impl FeasibilityTrendSpec {
    /// Exponential arrivals of mean `power`. Save-and-transmit uses symbol
    /// variance `power`; best-effort uses `power - power/10`.
    pub fn new(scheme: Scheme, power: f64, n_values: Vec<usize>, trials: usize, base_seed: u64) -> Self {
        let variance = match scheme {
            Scheme::SaveAndTransmit => power,
            Scheme::BestEffort => power - default_eps(power),
        };
        Self {
            scheme,
            arrivals: ArrivalSpec::exponential(power),
            symbols: SymbolModel::Gaussian { variance },
            n_values,
            trials,
            base_seed,
            timing: HarvestTiming::AfterUse,
        }
    }

    /// Best-effort symbol variance `power - eps`.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.symbols = SymbolModel::Gaussian {
            variance: self.arrivals.mean - eps,
        };
        self
    }
}

/// Default back-off for best-effort-transmit: a tenth of the recharge rate.
pub fn default_eps(power: f64) -> f64 {
    power / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub scheme: Scheme,
    pub n: usize,
    pub trials: usize,
    pub violation_rate: f64,
}

pub const FEASIBILITY_CSV_HEADER: [&str; 4] = ["scheme", "n", "trials", "violation_rate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTable {
    pub meta: Meta<FeasibilityTrendSpec>,
    pub rows: Vec<FeasibilityRow>,
}

fn symbol_energies(model: SymbolModel, n: usize, prefix: usize, seed: u64) -> Result<Vec<f64>> {
    match model {
        SymbolModel::Gaussian { variance } => {
            let book = coding::build_codebook(n, 1, variance, prefix, seed)?;
            Ok(book.codeword(0).iter().map(|x| x * x).collect())
        }
        SymbolModel::Constant { energy } => {
            if !(energy.is_finite() && energy >= 0.0) {
                return Err(Error::Parameter(format!("symbol energy must be >= 0, got {energy}")));
            }
            Ok((0..n).map(|i| if i < prefix { 0.0 } else { energy }).collect())
        }
    }
}

/// Whether trial `t` at blocklength `n` counts as a violation: the codeword
/// breaks causality (save-and-transmit), or some symbol in the second half
/// of the block is dropped (best-effort).
pub fn feasibility_trial(spec: &FeasibilityTrendSpec, n: usize, t: u64) -> Result<bool> {
    let salt = (n as u64) << 20 ^ t;
    let trace = generate_trace(&spec.arrivals, n, seed::derive(spec.base_seed, stream::ARRIVALS, salt))?;
    let prefix = match spec.scheme {
        Scheme::SaveAndTransmit => coding::default_prefix_length(n),
        Scheme::BestEffort => 0,
    };
    let x_sq = symbol_energies(spec.symbols, n, prefix, seed::derive(spec.base_seed, stream::CODEBOOK, salt))?;
    match spec.scheme {
        Scheme::SaveAndTransmit => {
            Ok(!energy_ledger::check_causal_feasibility(&x_sq, &trace, DEFAULT_TOLERANCE)?.feasible)
        }
        Scheme::BestEffort => {
            let mask = energy_ledger::run_best_effort_with(&x_sq, &trace, BatteryState::empty(), spec.timing)?;
            Ok(mask.infeasible_from(n / 2) > 0)
        }
    }
}

pub fn run_feasibility_trend(spec: &FeasibilityTrendSpec) -> Result<FeasibilityTable> {
    if spec.trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    if let Some(n) = spec.n_values.iter().find(|n| **n == 0) {
        return Err(Error::Parameter(format!("blocklength must be >= 1, got {n}")));
    }
    spec.arrivals.validate()?;
    let rows = spec
        .n_values
        .iter()
        .map(|&n| {
            let flags = (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| feasibility_trial(spec, n, t))
                .collect::<Result<Vec<bool>>>()?;
            let violations = flags.iter().filter(|v| **v).count();
            Ok(FeasibilityRow {
                scheme: spec.scheme,
                n,
                trials: spec.trials,
                violation_rate: violations as f64 / spec.trials as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibilityTable {
        meta: Meta::new(spec.base_seed, spec.clone()),
        rows,
    })
}

impl FeasibilityTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_table(&FEASIBILITY_CSV_HEADER, &self.rows, out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        save_table(&FEASIBILITY_CSV_HEADER, &self.rows, path)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn read_feasibility_csv(path: &Path) -> Result<Vec<FeasibilityRow>> {
    read_table(path)
}

// ---------------------------------------------------------------------------
// Scheme simulation batches
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scheme: Scheme,
    pub n: usize,
    pub power: f64,
    /// Best-effort back-off; ignored by save-and-transmit.
    pub eps: f64,
    pub messages: usize,
    /// Save-and-transmit prefix; `None` means `ceil(n^(3/4))`.
    pub prefix: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub arrivals: ArrivalSpec,
    #[serde(default)]
    pub timing: HarvestTiming,
}

impl SimulationSpec {
    /// Exponential arrivals of mean `power`, 16 messages, default prefix and back-off.
    pub fn new(scheme: Scheme, n: usize, power: f64, trials: usize, base_seed: u64) -> Self {
        Self {
            scheme,
            n,
            power,
            eps: default_eps(power),
            messages: 16,
            prefix: None,
            trials,
            base_seed,
            arrivals: ArrivalSpec::exponential(power),
            timing: HarvestTiming::AfterUse,
        }
    }

    pub fn prefix_len(&self) -> usize {
        match self.scheme {
            Scheme::SaveAndTransmit => self.prefix.unwrap_or_else(|| coding::default_prefix_length(self.n)),
            Scheme::BestEffort => 0,
        }
    }

    pub fn symbol_variance(&self) -> f64 {
        match self.scheme {
            Scheme::SaveAndTransmit => self.power,
            Scheme::BestEffort => self.power - self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("blocklength must be >= 1".into()));
        }
        if self.messages == 0 {
            return Err(Error::Parameter("message count must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be >= 1".into()));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(Error::Parameter(format!("power must be >= 0, got {}", self.power)));
        }
        if self.scheme == Scheme::BestEffort && !(self.eps > 0.0 && self.eps <= self.power) {
            return Err(Error::Parameter(format!(
                "eps must lie in (0, P] for best-effort, got {}",
                self.eps
            )));
        }
        if self.prefix_len() > self.n {
            return Err(Error::Parameter(format!(
                "prefix {} exceeds blocklength {}",
                self.prefix_len(),
                self.n
            )));
        }
        self.arrivals.validate()
    }
}

/// One CSV row of a simulation batch. `first_violation` is 0-based and empty
/// when the codeword satisfies causality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub scheme: Scheme,
    pub n: usize,
    pub h: usize,
    #[serde(rename = "P")]
    pub power: f64,
    pub var: f64,
    pub msg: usize,
    pub decoded: usize,
    pub error: bool,
    pub infeasible_count: usize,
    pub first_violation: Option<usize>,
}

pub const TRIAL_CSV_HEADER: [&str; 11] = [
    "trial",
    "scheme",
    "n",
    "h",
    "P",
    "var",
    "msg",
    "decoded",
    "error",
    "infeasible_count",
    "first_violation",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: usize,
    pub rate: f64,
    pub decode_error_rate: f64,
    /// Decode error rate of the same codewords and noise without any energy constraint.
    pub unconstrained_error_rate: f64,
    /// Trials whose codeword breaks a cumulative causality constraint.
    pub infeasible_codeword_rate: f64,
    /// Dropped (or, for save-and-transmit, zeroed) symbols over all channel uses.
    pub infeasible_symbol_fraction: f64,
    /// Same, restricted to the second half of each block.
    pub second_half_infeasible_fraction: f64,
    /// Trials with at least one dropped symbol in the second half.
    pub second_half_trial_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationBatch {
    pub meta: Meta<SimulationSpec>,
    pub summary: SimulationSummary,
    pub records: Vec<TrialRecord>,
}

struct TrialStats {
    record: TrialRecord,
    unconstrained_error: bool,
    second_half_infeasible: usize,
}

fn simulate_trial(spec: &SimulationSpec, t: u64) -> Result<TrialStats> {
    let base = spec.base_seed;
    let h = spec.prefix_len();
    let variance = spec.symbol_variance();
    let book = coding::build_codebook(spec.n, spec.messages, variance, h, seed::derive(base, stream::CODEBOOK, t))?;
    let trace = generate_trace(&spec.arrivals, spec.n, seed::derive(base, stream::ARRIVALS, t))?;
    let msg = (seed::derive(base, stream::MESSAGE, t) % spec.messages as u64) as usize;
    let noise_seed = seed::derive(base, stream::NOISE, t);

    let outcome = match spec.scheme {
        Scheme::SaveAndTransmit => coding::run_save_and_transmit(&book, msg, &trace, noise_seed)?,
        Scheme::BestEffort => {
            coding::run_best_effort_transmit_with(&book, msg, &trace, noise_seed, 1.0, spec.timing)?
        }
    };
    let unconstrained_error = coding::transmit_unconstrained(&book, msg, noise_seed)? != msg;
    Ok(TrialStats {
        second_half_infeasible: outcome.mask.infeasible_from(spec.n / 2),
        unconstrained_error,
        record: TrialRecord {
            trial: t as usize,
            scheme: spec.scheme,
            n: spec.n,
            h,
            power: spec.power,
            var: variance,
            msg,
            decoded: outcome.message_decoded,
            error: outcome.decode_error,
            infeasible_count: outcome.mask.infeasible_count,
            first_violation: outcome.feasibility.first_violation_index,
        },
    })
}

pub fn run_simulation(spec: &SimulationSpec) -> Result<SimulationBatch> {
    spec.validate()?;
    let stats = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| simulate_trial(spec, t))
        .collect::<Result<Vec<_>>>()?;

    let trials = stats.len() as f64;
    let frac = |count: usize| count as f64 / trials;
    let second_half_len = (spec.n - spec.n / 2) as f64;
    let summary = SimulationSummary {
        trials: stats.len(),
        rate: (spec.messages as f64).log2() / spec.n as f64,
        decode_error_rate: frac(stats.iter().filter(|s| s.record.error).count()),
        unconstrained_error_rate: frac(stats.iter().filter(|s| s.unconstrained_error).count()),
        infeasible_codeword_rate: frac(stats.iter().filter(|s| s.record.first_violation.is_some()).count()),
        infeasible_symbol_fraction: stats.iter().map(|s| s.record.infeasible_count).sum::<usize>() as f64
            / (trials * spec.n as f64),
        second_half_infeasible_fraction: stats.iter().map(|s| s.second_half_infeasible).sum::<usize>() as f64
            / (trials * second_half_len),
        second_half_trial_rate: frac(stats.iter().filter(|s| s.second_half_infeasible > 0).count()),
    };
    Ok(SimulationBatch {
        meta: Meta::new(spec.base_seed, spec.clone()),
        summary,
        records: stats.into_iter().map(|s| s.record).collect(),
    })
}

impl SimulationBatch {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_table(&TRIAL_CSV_HEADER, &self.records, out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        save_table(&TRIAL_CSV_HEADER, &self.records, path)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }
}

pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    read_table(path)
}

// ---------------------------------------------------------------------------
// Serialization helpers
// ---------------------------------------------------------------------------

/// Header first, even when there are no rows.
fn write_table<T: Serialize, W: Write>(header: &[&str], rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn save_table<T: Serialize>(header: &[&str], rows: &[T], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(header, rows, file).map_err(|e| Error::csv(path, e))
}

fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().collect::<csv::Result<Vec<T>>>().map_err(|e| Error::csv(path, e))
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
