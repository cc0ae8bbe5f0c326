//! Offline power allocation across large time slots.
//!
//! Given the mean recharge rate of every slot, choose per-slot transmit
//! powers that maximize `1/L sum 1/2 log2(1 + P_tr(i))` subject to
//! `sum_{i<=l} P_tr(i) <= sum_{i<=l} P_in(i)` for every prefix `l`.
//!
//! The optimum is the taut string under the cumulative arrival curve
//! `e(i)`: starting at the origin, repeatedly take the chord of minimum
//! slope to a future point of the curve; each chord's slope is the power
//! on the slots it spans. [`allocate_bruteforce`] solves the same problem by
//! enumerating every segmentation and is kept as an independent check.

use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrivals::SlotProfile;
use crate::{Error, Result};

/// Absolute tolerance on chord slopes and on causality checks.
pub const SLOPE_TOLERANCE: f64 = 1e-9;

/// Largest slot count accepted by [`allocate_bruteforce`].
pub const MAX_BRUTEFORCE_SLOTS: usize = 20;

/// `e(0) = 0, e(i) = sum_{j<=i} P_in(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    pub points: Vec<f64>,
}

impl CumulativeCurve {
    pub fn slots(&self) -> usize {
        self.points.len() - 1
    }

    fn chord_slope(&self, from: usize, to: usize) -> f64 {
        (self.points[to] - self.points[from]) / (to - from) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// Segment boundaries in cumulative-index form, starting with 0 and
    /// ending with `L`. Segment `k` covers slots `breakpoints[k-1]+1 ..= breakpoints[k]`.
    pub breakpoints: Vec<usize>,
    pub throughput: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub t_lb: f64,
    pub t_opt: f64,
    pub t_ub: f64,
}

pub fn cumulative(profile: &SlotProfile) -> CumulativeCurve {
    let mut points = Vec::with_capacity(profile.len() + 1);
    points.push(0.0);
    let mut acc = 0.0;
    for r in profile.rates() {
        acc += r;
        points.push(acc);
    }
    CumulativeCurve { points }
}

/// Minimum-slope staircase. Among chords whose slope is within
/// [`SLOPE_TOLERANCE`] of the minimum, the farthest endpoint wins, so equal
/// segments are merged.
pub fn allocate_optimal(profile: &SlotProfile) -> PowerAllocation {
    let curve = cumulative(profile);
    let slots = curve.slots();
    let mut powers = Vec::with_capacity(slots);
    let mut breakpoints = vec![0];
    let mut start = 0;
    while start < slots {
        let min_slope = (start + 1..=slots)
            .map(|k| curve.chord_slope(start, k))
            .fold(f64::INFINITY, f64::min);
        let end = (start + 1..=slots)
            .rev()
            .find(|&k| curve.chord_slope(start, k) <= min_slope + SLOPE_TOLERANCE)
            .expect("the minimizing endpoint qualifies");
        let level = curve.chord_slope(start, end);
        powers.extend(std::iter::repeat_n(level, end - start));
        breakpoints.push(end);
        start = end;
    }
    let throughput = slot_throughput(&powers);
    PowerAllocation {
        powers,
        breakpoints,
        throughput,
    }
}

fn slot_rate(power: f64) -> f64 {
    0.5 * power.ln_1p() / std::f64::consts::LN_2
}

fn slot_throughput(powers: &[f64]) -> f64 {
    powers.iter().map(|p| slot_rate(*p)).sum::<f64>() / powers.len() as f64
}

/// Average of `1/2 log2(1 + P_tr(i))` over the slots.
pub fn throughput(powers: &[f64]) -> Result<f64> {
    if powers.is_empty() {
        return Err(Error::Domain("throughput of an empty allocation".into()));
    }
    if let Some((i, p)) = powers.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
        return Err(Error::Domain(format!("power for slot {} is {p}; powers must be >= 0", i + 1)));
    }
    Ok(slot_throughput(powers))
}

/// Throughput without power management (`P_tr = P_in`).
pub fn lower_bound(profile: &SlotProfile) -> f64 {
    slot_throughput(profile.rates())
}

/// Throughput at the average recharge rate, ignoring causality.
pub fn upper_bound(profile: &SlotProfile) -> f64 {
    let mean = profile.rates().iter().sum::<f64>() / profile.len() as f64;
    slot_rate(mean)
}

pub fn throughput_report(profile: &SlotProfile) -> ThroughputReport {
    ThroughputReport {
        t_lb: lower_bound(profile),
        t_opt: allocate_optimal(profile).throughput,
        t_ub: upper_bound(profile),
    }
}

/// Whether `powers` satisfies every prefix causality constraint within `tolerance`.
pub fn is_causal(powers: &[f64], profile: &SlotProfile, tolerance: f64) -> bool {
    if powers.len() != profile.len() {
        return false;
    }
    let mut spent = 0.0;
    let mut harvested = 0.0;
    for (p, r) in powers.iter().zip(profile.rates()) {
        spent += p;
        harvested += r;
        if spent > harvested + tolerance {
            return false;
        }
    }
    true
}

/// Exhaustive search over all `2^(L-1)` segmentations. Each segment spends
/// exactly the energy harvested within it; causality-violating candidates
/// are dropped and the best remaining one is returned (ties go to the
/// lexicographically smallest breakpoint set).
pub fn allocate_bruteforce(profile: &SlotProfile) -> Result<PowerAllocation> {
    let slots = profile.len();
    if slots > MAX_BRUTEFORCE_SLOTS {
        return Err(Error::Resource(format!(
            "brute force is limited to {MAX_BRUTEFORCE_SLOTS} slots, got {slots}"
        )));
    }
    let rates = profile.rates();
    let mut best: Option<PowerAllocation> = None;
    for mask in 0u32..(1u32 << (slots - 1)) {
        let mut breakpoints = vec![0];
        breakpoints.extend((1..slots).filter(|b| mask & (1 << (b - 1)) != 0));
        breakpoints.push(slots);

        let mut powers = Vec::with_capacity(slots);
        for w in breakpoints.windows(2) {
            let energy: f64 = rates[w[0]..w[1]].iter().sum();
            let level = energy / (w[1] - w[0]) as f64;
            powers.extend(std::iter::repeat_n(level, w[1] - w[0]));
        }
        if !is_causal(&powers, profile, SLOPE_TOLERANCE) {
            continue;
        }
        let t = slot_throughput(&powers);
        let better = match &best {
            None => true,
            Some(b) => t > b.throughput || (t == b.throughput && breakpoints < b.breakpoints),
        };
        if better {
            best = Some(PowerAllocation {
                powers,
                breakpoints,
                throughput: t,
            });
        }
    }
    // The single-segment-per-slot partition (P_tr = P_in) is always causal.
    Ok(best.expect("at least one causal segmentation exists"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingVerdict {
    pub level: f64,
    pub base_throughput: f64,
    pub smoothed_throughput: f64,
    pub improved: bool,
}

/// Replaces `base` on the inclusive 0-based `segment` by its average and
/// compares throughputs.
///
/// Fails with [`Error::Precondition`] when the segment is degenerate, when
/// `base` or the smoothed allocation is not causal, or when smoothing leaves
/// `base` unchanged.
pub fn check_smoothing_improvement(
    base: &[f64],
    segment: RangeInclusive<usize>,
    profile: &SlotProfile,
) -> Result<SmoothingVerdict> {
    let (start, end) = (*segment.start(), *segment.end());
    if base.len() != profile.len() {
        return Err(Error::Domain(format!(
            "allocation has {} slots, profile has {}",
            base.len(),
            profile.len()
        )));
    }
    if start >= end || end >= base.len() {
        return Err(Error::Precondition(format!(
            "segment {start}..={end} must satisfy start < end < {}",
            base.len()
        )));
    }
    let base_throughput = throughput(base)?;
    if !is_causal(base, profile, SLOPE_TOLERANCE) {
        return Err(Error::Precondition("base allocation violates causality".into()));
    }

    let level = base[segment.clone()].iter().sum::<f64>() / (end - start + 1) as f64;
    let mut smoothed = base.to_vec();
    smoothed[segment.clone()].fill(level);

    let scale = base.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    if base[segment].iter().all(|p| (p - level).abs() <= 1e-12 * scale) {
        return Err(Error::Precondition("smoothing leaves the allocation unchanged".into()));
    }
    if !is_causal(&smoothed, profile, SLOPE_TOLERANCE) {
        return Err(Error::Precondition("smoothed allocation violates causality".into()));
    }
    let smoothed_throughput = slot_throughput(&smoothed);
    Ok(SmoothingVerdict {
        level,
        base_throughput,
        smoothed_throughput,
        improved: smoothed_throughput > base_throughput,
    })
}

/// One row of the per-slot allocation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub slot: usize,
    pub p_in: f64,
    pub p_tr: f64,
    pub cum_in: f64,
    pub cum_tr: f64,
    pub rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub t_lb: f64,
    pub t_opt: f64,
    pub t_ub: f64,
    pub breakpoints: Vec<usize>,
}

impl PowerAllocation {
    pub fn rows(&self, profile: &SlotProfile) -> Vec<AllocationRow> {
        let mut cum_in = 0.0;
        let mut cum_tr = 0.0;
        profile
            .rates()
            .iter()
            .zip(&self.powers)
            .enumerate()
            .map(|(i, (p_in, p_tr))| {
                cum_in += p_in;
                cum_tr += p_tr;
                AllocationRow {
                    slot: i + 1,
                    p_in: *p_in,
                    p_tr: *p_tr,
                    cum_in,
                    cum_tr,
                    rate_bits: slot_rate(*p_tr),
                }
            })
            .collect()
    }

    pub fn summary(&self, profile: &SlotProfile) -> AllocationSummary {
        AllocationSummary {
            t_lb: lower_bound(profile),
            t_opt: self.throughput,
            t_ub: upper_bound(profile),
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// CSV with columns `slot,p_in,p_tr,cum_in,cum_tr,rate_bits`.
    pub fn write_csv<W: Write>(&self, profile: &SlotProfile, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows(profile) {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, profile: &SlotProfile, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(profile, file).map_err(|e| Error::csv(path, e))
    }

    pub fn save_summary_json(&self, profile: &SlotProfile, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary(profile)).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
