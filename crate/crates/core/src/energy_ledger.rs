//! Battery bookkeeping for a single transmission.
//!
//! Two views of energy causality live here:
//!
//! * [`check_causal_feasibility`] tests a whole symbol-energy sequence
//!   against the cumulative constraints `sum_{i<=k} X_i^2 <= sum_{i<=k} E_i`;
//! * [`run_best_effort`] plays the energy-queue update forward, dropping
//!   (sending 0 in place of) any symbol the battery cannot afford.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalTrace;
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Default absolute tolerance, in energy units, for causality comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    stored: f64,
    /// `None` is an unbounded battery.
    capacity: Option<f64>,
}

impl BatteryState {
    pub fn empty() -> Self {
        Self {
            stored: 0.0,
            capacity: None,
        }
    }

    pub fn with_stored(stored: f64) -> Result<Self> {
        Self::empty().try_with_stored(stored)
    }

    /// Finite-capacity battery. Overflow is clipped.
    pub fn with_capacity(mut self, capacity: f64) -> Result<Self> {
        if !(capacity.is_finite() && capacity >= 0.0) {
            return Err(Error::Parameter(format!("battery capacity must be >= 0, got {capacity}")));
        }
        self.capacity = Some(capacity);
        self.stored = self.stored.min(capacity);
        Ok(self)
    }

    fn try_with_stored(mut self, stored: f64) -> Result<Self> {
        if !(stored.is_finite() && stored >= 0.0) {
            return Err(Error::Parameter(format!("stored energy must be >= 0, got {stored}")));
        }
        self.stored = match self.capacity {
            Some(c) => stored.min(c),
            None => stored,
        };
        Ok(self)
    }

    pub fn stored(&self) -> f64 {
        self.stored
    }

    pub fn capacity(&self) -> Option<f64> {
        self.capacity
    }
}

impl Default for BatteryState {
    fn default() -> Self {
        Self::empty()
    }
}

/// When the harvest of channel use `i` becomes spendable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarvestTiming {
    /// `S(i+1) = S(i) + E_i - X_i^2 1(S(i) >= X_i^2)`: the sent-test sees
    /// only energy stored before channel use `i`.
    #[default]
    AfterUse,
    /// `E_i` is credited first, so the test is `S(i) + E_i >= X_i^2`.
    BeforeUse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// 0-based index of the first channel use whose cumulative constraint fails.
    pub first_violation_index: Option<usize>,
    /// `sum_{j<=k} (E_j - X_j^2)` for every `k`.
    pub slack: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMask {
    pub sent: Vec<bool>,
    pub infeasible_count: usize,
    /// Battery content after each channel use.
    pub battery_trajectory: Vec<f64>,
}

impl TransmissionMask {
    /// Infeasible symbols with index `>= from`.
    pub fn infeasible_from(&self, from: usize) -> usize {
        self.sent.iter().skip(from).filter(|s| !**s).count()
    }

    /// CSV with columns `i,e_i,x_sq,sent,s_after` (1-based `i`).
    pub fn write_csv<W: Write>(&self, symbol_energies: &[f64], trace: &ArrivalTrace, out: W) -> Result<()> {
        check_lengths(symbol_energies.len(), trace.len())?;
        check_lengths(self.sent.len(), trace.len())?;
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::csv("<trajectory>", e);
        w.write_record(["i", "e_i", "x_sq", "sent", "s_after"]).map_err(to_err)?;
        for i in 0..self.sent.len() {
            w.write_record([
                (i + 1).to_string(),
                trace.energies()[i].to_string(),
                symbol_energies[i].to_string(),
                self.sent[i].to_string(),
                self.battery_trajectory[i].to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<trajectory>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, symbol_energies: &[f64], trace: &ArrivalTrace, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(symbol_energies, trace, file)
    }
}

fn check_lengths(symbols: usize, arrivals: usize) -> Result<()> {
    if symbols != arrivals {
        return Err(Error::Domain(format!(
            "length mismatch: {symbols} symbol energies vs {arrivals} arrivals"
        )));
    }
    Ok(())
}

fn check_symbol_energies(symbol_energies: &[f64]) -> Result<()> {
    if let Some((i, x)) = symbol_energies.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!("symbol energy at index {i} is {x}; must be >= 0")));
    }
    Ok(())
}

/// Cumulative causality check with compensated running sums.
pub fn check_causal_feasibility(
    symbol_energies: &[f64],
    trace: &ArrivalTrace,
    tolerance: f64,
) -> Result<FeasibilityReport> {
    check_lengths(symbol_energies.len(), trace.len())?;
    if symbol_energies.is_empty() {
        return Err(Error::Domain("feasibility check needs at least one channel use".into()));
    }
    check_symbol_energies(symbol_energies)?;
    if !(tolerance >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be >= 0, got {tolerance}")));
    }

    let mut acc = CompensatedSum::new();
    let mut first_violation_index = None;
    let slack: Vec<f64> = symbol_energies
        .iter()
        .zip(trace.energies())
        .enumerate()
        .map(|(k, (x_sq, e))| {
            acc.add(*e);
            acc.add(-x_sq);
            let s = acc.value();
            if first_violation_index.is_none() && s < -tolerance {
                first_violation_index = Some(k);
            }
            s
        })
        .collect();

    Ok(FeasibilityReport {
        feasible: first_violation_index.is_none(),
        first_violation_index,
        slack,
    })
}

/// One channel use of the energy queue. Harvest is credited after the
/// sent-test.
pub fn best_effort_step(state: BatteryState, e_i: f64, x_sq: f64) -> (BatteryState, bool) {
    best_effort_step_with(state, e_i, x_sq, HarvestTiming::AfterUse)
}

pub fn best_effort_step_with(
    state: BatteryState,
    e_i: f64,
    x_sq: f64,
    timing: HarvestTiming,
) -> (BatteryState, bool) {
    let available = match timing {
        HarvestTiming::AfterUse => state.stored,
        HarvestTiming::BeforeUse => state.stored + e_i,
    };
    let sent = available >= x_sq;
    let spent = if sent { x_sq } else { 0.0 };
    let mut stored = (state.stored + e_i - spent).max(0.0);
    if let Some(c) = state.capacity {
        stored = stored.min(c);
    }
    (
        BatteryState {
            stored,
            capacity: state.capacity,
        },
        sent,
    )
}

pub fn run_best_effort(
    symbol_energies: &[f64],
    trace: &ArrivalTrace,
    initial: BatteryState,
) -> Result<TransmissionMask> {
    run_best_effort_with(symbol_energies, trace, initial, HarvestTiming::AfterUse)
}

pub fn run_best_effort_with(
    symbol_energies: &[f64],
    trace: &ArrivalTrace,
    initial: BatteryState,
    timing: HarvestTiming,
) -> Result<TransmissionMask> {
    check_lengths(symbol_energies.len(), trace.len())?;
    check_symbol_energies(symbol_energies)?;

    let n = symbol_energies.len();
    let mut sent = Vec::with_capacity(n);
    let mut battery_trajectory = Vec::with_capacity(n);
    let mut state = initial;
    for (x_sq, e) in symbol_energies.iter().zip(trace.energies()) {
        let (next, ok) = best_effort_step_with(state, *e, *x_sq, timing);
        sent.push(ok);
        battery_trajectory.push(next.stored);
        state = next;
    }
    let infeasible_count = sent.iter().filter(|s| !**s).count();
    Ok(TransmissionMask {
        sent,
        infeasible_count,
        battery_trajectory,
    })
}
