//! Stochastic energy arrivals at both time scales.
//!
//! Per channel use, a transmitter harvests an i.i.d. non-negative energy
//! `E_i` whose mean is the average recharge rate `P` ([`ArrivalTrace`]).
//! Per large slot, the mean recharge rate itself varies and is described by
//! a [`SlotProfile`].

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::seed::{self, SimRng};
use crate::{Error, Result};

/// Shape of the per-sample arrival law. The mean lives on [`ArrivalSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum Distribution {
    Constant,
    Exponential,
    /// `mean / p` with probability `p`, otherwise 0.
    BernoulliScaled { p: f64 },
    /// Uniform on `[mean - half_width, mean + half_width]`; needs `half_width <= mean`.
    Uniform { half_width: f64 },
    /// Gamma law with the given standard deviation (shape `(mean/std)^2`).
    /// `std == mean` is the exponential law.
    Gamma { std: f64 },
    /// Resampling, uniformly with replacement, from a fixed set of values.
    Empirical { values: Vec<f64> },
}

/// Two-parameter families that can realize a requested (mean, std) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanStdFamily {
    Gamma,
    BernoulliScaled,
    Uniform,
}

impl std::str::FromStr for MeanStdFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Self::Gamma),
            "bernoulli-scaled" => Ok(Self::BernoulliScaled),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Parameter(format!(
                "unknown distribution family `{other}` (expected gamma, bernoulli-scaled or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    #[serde(flatten)]
    pub distribution: Distribution,
    pub mean: f64,
}

impl ArrivalSpec {
    pub fn constant(mean: f64) -> Self {
        Self {
            distribution: Distribution::Constant,
            mean,
        }
    }

    pub fn exponential(mean: f64) -> Self {
        Self {
            distribution: Distribution::Exponential,
            mean,
        }
    }

    pub fn bernoulli_scaled(mean: f64, p: f64) -> Self {
        Self {
            distribution: Distribution::BernoulliScaled { p },
            mean,
        }
    }

    pub fn uniform(mean: f64, half_width: f64) -> Self {
        Self {
            distribution: Distribution::Uniform { half_width },
            mean,
        }
    }

    pub fn gamma(mean: f64, std: f64) -> Self {
        Self {
            distribution: Distribution::Gamma { std },
            mean,
        }
    }

    /// Resampling law over `values`; the mean is taken from the values.
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("empirical distribution needs at least one value".into()));
        }
        let mean = crate::numeric::sum(values.iter().copied()) / values.len() as f64;
        let spec = Self {
            distribution: Distribution::Empirical { values },
            mean,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Member of `family` with the requested mean and standard deviation.
    pub fn with_mean_and_std(family: MeanStdFamily, mean: f64, std: f64) -> Result<Self> {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::Parameter(format!("standard deviation must be >= 0, got {std}")));
        }
        let spec = if std == 0.0 {
            Self::constant(mean)
        } else {
            match family {
                MeanStdFamily::Gamma => Self::gamma(mean, std),
                MeanStdFamily::BernoulliScaled => {
                    if mean <= 0.0 {
                        return Err(Error::Parameter(
                            "bernoulli-scaled arrivals with zero mean cannot have positive std".into(),
                        ));
                    }
                    let p = mean * mean / (mean * mean + std * std);
                    Self::bernoulli_scaled(mean, p)
                }
                MeanStdFamily::Uniform => Self::uniform(mean, std * 3f64.sqrt()),
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mean = self.mean;
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::Parameter(format!("mean must be finite and >= 0, got {mean}")));
        }
        match &self.distribution {
            Distribution::Constant | Distribution::Exponential => {}
            Distribution::BernoulliScaled { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::Parameter(format!("success probability must lie in (0, 1], got {p}")));
                }
            }
            Distribution::Uniform { half_width } => {
                if !(half_width.is_finite() && *half_width >= 0.0) {
                    return Err(Error::Parameter(format!("half-width must be >= 0, got {half_width}")));
                }
                if *half_width > mean {
                    return Err(Error::Parameter(format!(
                        "half-width {half_width} exceeds mean {mean}; samples would go negative"
                    )));
                }
            }
            Distribution::Gamma { std } => {
                if !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::Parameter(format!("standard deviation must be >= 0, got {std}")));
                }
                if mean == 0.0 && *std > 0.0 {
                    return Err(Error::Parameter("gamma arrivals with zero mean cannot have positive std".into()));
                }
            }
            Distribution::Empirical { values } => {
                if values.is_empty() {
                    return Err(Error::Parameter("empirical distribution needs at least one value".into()));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::Parameter(format!("empirical value {v} is not a non-negative number")));
                }
                let m = crate::numeric::sum(values.iter().copied()) / values.len() as f64;
                if (m - mean).abs() > 1e-9 * mean.max(1.0) {
                    return Err(Error::Parameter(format!(
                        "mean field {mean} does not match the empirical mean {m}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Analytic standard deviation of one sample.
    pub fn std(&self) -> f64 {
        match &self.distribution {
            Distribution::Constant => 0.0,
            Distribution::Exponential => self.mean,
            Distribution::BernoulliScaled { p } => self.mean * ((1.0 - p) / p).sqrt(),
            Distribution::Uniform { half_width } => half_width / 3f64.sqrt(),
            Distribution::Gamma { std } => *std,
            Distribution::Empirical { values } => {
                let ss = crate::numeric::sum(values.iter().map(|v| (v - self.mean).powi(2)));
                (ss / values.len() as f64).sqrt()
            }
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let mean = self.mean;
        let kind = match &self.distribution {
            _ if mean == 0.0 => SamplerKind::Fixed(0.0),
            Distribution::Constant => SamplerKind::Fixed(mean),
            Distribution::Exponential => SamplerKind::Exp(
                Exp::new(1.0 / mean).map_err(|e| Error::Parameter(e.to_string()))?,
            ),
            Distribution::BernoulliScaled { p } if *p == 1.0 => SamplerKind::Fixed(mean),
            Distribution::BernoulliScaled { p } => SamplerKind::Bernoulli {
                p: *p,
                value: mean / p,
            },
            Distribution::Uniform { half_width } if *half_width == 0.0 => SamplerKind::Fixed(mean),
            Distribution::Uniform { half_width } => SamplerKind::Uniform(
                Uniform::new_inclusive(mean - half_width, mean + half_width)
                    .map_err(|e| Error::Parameter(e.to_string()))?,
            ),
            Distribution::Gamma { std } if *std == 0.0 => SamplerKind::Fixed(mean),
            Distribution::Gamma { std } => {
                let shape = (mean / std).powi(2);
                let scale = std * std / mean;
                SamplerKind::Gamma(Gamma::new(shape, scale).map_err(|e| Error::Parameter(e.to_string()))?)
            }
            Distribution::Empirical { values } => SamplerKind::Empirical(values.clone()),
        };
        Ok(Sampler { kind })
    }
}

/// Prepared sampler for one [`ArrivalSpec`].
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Fixed(f64),
    Exp(Exp<f64>),
    Bernoulli { p: f64, value: f64 },
    Uniform(Uniform<f64>),
    Gamma(Gamma<f64>),
    Empirical(Vec<f64>),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match &self.kind {
            SamplerKind::Fixed(v) => *v,
            SamplerKind::Exp(d) => d.sample(rng),
            SamplerKind::Bernoulli { p, value } => {
                if rng.random::<f64>() < *p {
                    *value
                } else {
                    0.0
                }
            }
            SamplerKind::Uniform(d) => d.sample(rng),
            SamplerKind::Gamma(d) => d.sample(rng),
            SamplerKind::Empirical(values) => values[rng.random_range(0..values.len())],
        };
        x.max(0.0)
    }

    pub fn fill(&self, rng: &mut SimRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Harvested energy per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTrace {
    energies: Vec<f64>,
    seed: Option<u64>,
    spec: Option<ArrivalSpec>,
}

impl ArrivalTrace {
    /// Wraps an explicit energy sequence (no generating spec).
    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        if let Some((i, e)) = energies.iter().enumerate().find(|(_, e)| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Domain(format!("energy at index {i} is {e}; arrivals must be >= 0")));
        }
        Ok(Self {
            energies,
            seed: None,
            spec: None,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn spec(&self) -> Option<&ArrivalSpec> {
        self.spec.as_ref()
    }

    /// Single-column CSV with header `e_i`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["e_i"])?;
        for e in &self.energies {
            w.write_record([e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::csv(path, e))
    }
}

/// Mean recharge power per large slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotProfile {
    rates: Vec<f64>,
    /// Slot length; carried for reporting only, never used numerically.
    pub slot_duration: f64,
}

impl SlotProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Domain("a slot profile needs at least one slot".into()));
        }
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Domain(format!("rate for slot {} is {r}; rates must be >= 0", i + 1)));
        }
        Ok(Self {
            rates,
            slot_duration: 1.0,
        })
    }

    pub fn with_slot_duration(mut self, slot_duration: f64) -> Self {
        self.slot_duration = slot_duration;
        self
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.rates.iter().all(|r| *r == self.rates[0])
    }

    /// Reads one non-negative number per line. Blank lines and `#` comments
    /// are ignored; errors carry the 1-based line number.
    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rates = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let v: f64 = content
                .parse()
                .map_err(|_| parse_err(format!("`{content}` is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(parse_err(format!("rate {v} must be a non-negative finite number")));
            }
            rates.push(v);
        }
        if rates.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "profile file contains no rates".into(),
            });
        }
        Self::new(rates)
    }
}

pub fn generate_trace(spec: &ArrivalSpec, n: usize, seed: u64) -> Result<ArrivalTrace> {
    if n == 0 {
        return Err(Error::Parameter("trace length must be >= 1".into()));
    }
    let sampler = spec.sampler()?;
    let mut rng = seed::rng(seed);
    Ok(ArrivalTrace {
        energies: sampler.fill(&mut rng, n),
        seed: Some(seed),
        spec: Some(spec.clone()),
    })
}

pub fn generate_slot_profile(spec: &ArrivalSpec, slots: usize, seed: u64) -> Result<SlotProfile> {
    if slots == 0 {
        return Err(Error::Parameter("slot count must be >= 1".into()));
    }
    let sampler = spec.sampler()?;
    let mut rng = seed::rng(seed);
    SlotProfile::new(sampler.fill(&mut rng, slots))
}

pub fn empirical_mean(trace: &ArrivalTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Domain("empirical mean of an empty trace".into()));
    }
    Ok(crate::numeric::sum(trace.energies.iter().copied()) / trace.len() as f64)
}
