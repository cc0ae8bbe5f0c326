//! Random Gaussian codebooks over a unit-noise AWGN channel, and the two
//! energy-harvesting transmission schemes.
//!
//! Decoding is minimum Euclidean distance, which is what a desk-scale
//! experiment can afford; codebooks are capped by [`DEFAULT_MAX_ENTRIES`].

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalTrace;
use crate::energy_ledger::{
    self, BatteryState, FeasibilityReport, HarvestTiming, TransmissionMask, DEFAULT_TOLERANCE,
};
use crate::seed;
use crate::{Error, Result};

/// Largest `M * n` a codebook may hold unless a budget is passed explicitly.
pub const DEFAULT_MAX_ENTRIES: usize = 1 << 26;

/// `1/2 log2(1 + P)` bits per channel use.
pub fn capacity(power: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {power}")));
    }
    Ok(0.5 * power.ln_1p() / std::f64::consts::LN_2)
}

/// Rate of save-and-transmit with an `h`-symbol zero prefix: `(n - h)/n * C(P)`.
pub fn sat_achievable_rate(n: usize, h: usize, power: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("blocklength must be >= 1".into()));
    }
    if h > n {
        return Err(Error::Domain(format!("prefix length {h} exceeds blocklength {n}")));
    }
    Ok((n - h) as f64 / n as f64 * capacity(power)?)
}

/// `ceil(n^(3/4))`, computed exactly: the smallest `h` with `h^4 >= n^3`.
pub fn default_prefix_length(n: usize) -> usize {
    let n3 = (n as u128).pow(3);
    let mut h = (n as f64).powf(0.75).ceil() as u128;
    while h > 0 && (h - 1).pow(4) >= n3 {
        h -= 1;
    }
    while h.pow(4) < n3 {
        h += 1;
    }
    h as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    blocklength: usize,
    num_messages: usize,
    symbol_variance: f64,
    prefix_zeros: usize,
    /// Row-major `num_messages x blocklength`.
    symbols: Vec<f64>,
}

impl Codebook {
    pub fn blocklength(&self) -> usize {
        self.blocklength
    }

    pub fn num_messages(&self) -> usize {
        self.num_messages
    }

    pub fn symbol_variance(&self) -> f64 {
        self.symbol_variance
    }

    pub fn prefix_zeros(&self) -> usize {
        self.prefix_zeros
    }

    /// `log2(M) / n` bits per channel use.
    pub fn rate(&self) -> f64 {
        (self.num_messages as f64).log2() / self.blocklength as f64
    }

    pub fn codeword(&self, msg: usize) -> &[f64] {
        let n = self.blocklength;
        &self.symbols[msg * n..(msg + 1) * n]
    }

    pub fn codewords(&self) -> impl Iterator<Item = &[f64]> {
        self.symbols.chunks_exact(self.blocklength)
    }

    fn check_message(&self, msg: usize) -> Result<()> {
        if msg >= self.num_messages {
            return Err(Error::Domain(format!(
                "message {msg} out of range for a codebook of {} messages",
                self.num_messages
            )));
        }
        Ok(())
    }
}

pub fn build_codebook(n: usize, m: usize, variance: f64, prefix_zeros: usize, seed: u64) -> Result<Codebook> {
    build_codebook_with_budget(n, m, variance, prefix_zeros, seed, DEFAULT_MAX_ENTRIES)
}

/// Draws every non-prefix symbol i.i.d. `N(0, variance)`, row by row.
pub fn build_codebook_with_budget(
    n: usize,
    m: usize,
    variance: f64,
    prefix_zeros: usize,
    seed: u64,
    max_entries: usize,
) -> Result<Codebook> {
    if n == 0 || m == 0 {
        return Err(Error::Parameter(format!(
            "codebook needs n >= 1 and M >= 1 (got n = {n}, M = {m})"
        )));
    }
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::Parameter(format!("symbol variance must be >= 0, got {variance}")));
    }
    if prefix_zeros > n {
        return Err(Error::Parameter(format!("prefix length {prefix_zeros} exceeds blocklength {n}")));
    }
    let entries = n
        .checked_mul(m)
        .filter(|e| *e <= max_entries)
        .ok_or_else(|| Error::Resource(format!("codebook of {m} x {n} exceeds the {max_entries}-entry budget")))?;

    let std = variance.sqrt();
    let mut rng = seed::rng(seed);
    let mut symbols = vec![0.0; entries];
    for row in symbols.chunks_exact_mut(n) {
        for x in &mut row[prefix_zeros..] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = std * z;
        }
    }
    Ok(Codebook {
        blocklength: n,
        num_messages: m,
        symbol_variance: variance,
        prefix_zeros,
        symbols,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOutput {
    pub received: Vec<f64>,
    pub noise_seed: u64,
}

/// Unit-variance AWGN.
pub fn awgn(transmitted: &[f64], noise_seed: u64) -> ChannelOutput {
    awgn_with_std(transmitted, noise_seed, 1.0)
}

/// AWGN with an explicit noise standard deviation; `0.0` gives a noiseless
/// channel for tests.
pub fn awgn_with_std(transmitted: &[f64], noise_seed: u64, noise_std: f64) -> ChannelOutput {
    let mut rng = seed::rng(noise_seed);
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite noise std");
    let received = transmitted.iter().map(|x| x + noise.sample(&mut rng)).collect();
    ChannelOutput { received, noise_seed }
}

/// Index of the codeword nearest to the received vector; ties go to the
/// lowest index.
pub fn decode_min_distance(output: &ChannelOutput, book: &Codebook) -> Result<usize> {
    if output.received.len() != book.blocklength {
        return Err(Error::Domain(format!(
            "received length {} does not match blocklength {}",
            output.received.len(),
            book.blocklength
        )));
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (m, cw) in book.codewords().enumerate() {
        let d: f64 = cw
            .iter()
            .zip(&output.received)
            .map(|(x, y)| (y - x) * (y - x))
            .sum();
        if d < best_dist {
            best = m;
            best_dist = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SaveAndTransmit,
    BestEffort,
}

impl Scheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::SaveAndTransmit => "sat",
            Scheme::BestEffort => "bet",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sat" | "save-and-transmit" => Ok(Scheme::SaveAndTransmit),
            "bet" | "best-effort" => Ok(Scheme::BestEffort),
            other => Err(Error::Parameter(format!("unknown scheme `{other}` (expected sat or bet)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub message_sent: usize,
    pub message_decoded: usize,
    pub decode_error: bool,
    pub mask: TransmissionMask,
    pub feasibility: FeasibilityReport,
    /// Codebook rate on success, 0 on error.
    pub achieved_rate: f64,
}

fn symbol_energies(codeword: &[f64]) -> Vec<f64> {
    codeword.iter().map(|x| x * x).collect()
}

fn check_trace(book: &Codebook, trace: &ArrivalTrace) -> Result<()> {
    if trace.len() != book.blocklength {
        return Err(Error::Domain(format!(
            "trace length {} does not match blocklength {}",
            trace.len(),
            book.blocklength
        )));
    }
    Ok(())
}

fn outcome(
    scheme: Scheme,
    book: &Codebook,
    msg: usize,
    decoded: usize,
    mask: TransmissionMask,
    feasibility: FeasibilityReport,
) -> SchemeOutcome {
    let decode_error = decoded != msg;
    SchemeOutcome {
        scheme,
        message_sent: msg,
        message_decoded: decoded,
        decode_error,
        mask,
        feasibility,
        achieved_rate: if decode_error { 0.0 } else { book.rate() },
    }
}

/// Save-and-transmit with unit noise.
pub fn run_save_and_transmit(
    book: &Codebook,
    msg: usize,
    trace: &ArrivalTrace,
    noise_seed: u64,
) -> Result<SchemeOutcome> {
    run_save_and_transmit_with_noise(book, msg, trace, noise_seed, 1.0)
}

/// Save-and-transmit: the codeword goes out only if it satisfies every
/// cumulative causality constraint. Otherwise the all-zero word is sent and
/// the receiver is taken to output message 0.
pub fn run_save_and_transmit_with_noise(
    book: &Codebook,
    msg: usize,
    trace: &ArrivalTrace,
    noise_seed: u64,
    noise_std: f64,
) -> Result<SchemeOutcome> {
    check_trace(book, trace)?;
    book.check_message(msg)?;
    let codeword = book.codeword(msg);
    let x_sq = symbol_energies(codeword);
    let feasibility = energy_ledger::check_causal_feasibility(&x_sq, trace, DEFAULT_TOLERANCE)?;

    let (decoded, mask) = if feasibility.feasible {
        let mask = TransmissionMask {
            sent: vec![true; x_sq.len()],
            infeasible_count: 0,
            battery_trajectory: feasibility.slack.iter().map(|s| s.max(0.0)).collect(),
        };
        let output = awgn_with_std(codeword, noise_seed, noise_std);
        (decode_min_distance(&output, book)?, mask)
    } else {
        // Nonzero symbols were replaced by zeros; the battery only charges.
        let sent: Vec<bool> = x_sq.iter().map(|x| *x == 0.0).collect();
        let infeasible_count = sent.iter().filter(|s| !**s).count();
        let mut acc = crate::numeric::CompensatedSum::new();
        let battery_trajectory = trace
            .energies()
            .iter()
            .map(|e| {
                acc.add(*e);
                acc.value()
            })
            .collect();
        let mask = TransmissionMask {
            sent,
            infeasible_count,
            battery_trajectory,
        };
        (0, mask)
    };
    Ok(outcome(Scheme::SaveAndTransmit, book, msg, decoded, mask, feasibility))
}

/// Best-effort-transmit with unit noise and harvest credited after use.
pub fn run_best_effort_transmit(
    book: &Codebook,
    msg: usize,
    trace: &ArrivalTrace,
    noise_seed: u64,
) -> Result<SchemeOutcome> {
    run_best_effort_transmit_with(book, msg, trace, noise_seed, 1.0, HarvestTiming::AfterUse)
}

/// Best-effort-transmit: each symbol the battery cannot cover is replaced by
/// 0. The receiver decodes against the unmasked codebook.
pub fn run_best_effort_transmit_with(
    book: &Codebook,
    msg: usize,
    trace: &ArrivalTrace,
    noise_seed: u64,
    noise_std: f64,
    timing: HarvestTiming,
) -> Result<SchemeOutcome> {
    check_trace(book, trace)?;
    book.check_message(msg)?;
    let codeword = book.codeword(msg);
    let x_sq = symbol_energies(codeword);
    let feasibility = energy_ledger::check_causal_feasibility(&x_sq, trace, DEFAULT_TOLERANCE)?;
    let mask = energy_ledger::run_best_effort_with(&x_sq, trace, BatteryState::empty(), timing)?;
    let input: Vec<f64> = codeword
        .iter()
        .zip(&mask.sent)
        .map(|(x, s)| if *s { *x } else { 0.0 })
        .collect();
    let output = awgn_with_std(&input, noise_seed, noise_std);
    let decoded = decode_min_distance(&output, book)?;
    Ok(outcome(Scheme::BestEffort, book, msg, decoded, mask, feasibility))
}

/// Reference transmission without any energy constraint.
pub fn transmit_unconstrained(book: &Codebook, msg: usize, noise_seed: u64) -> Result<usize> {
    book.check_message(msg)?;
    let output = awgn(book.codeword(msg), noise_seed);
    decode_min_distance(&output, book)
}
