//! Experiment config files.
//!
//! A config is TOML with exactly one section, `[fig5]` or `[feasibility]`:
//!
//! ```toml
//! [fig5]
//! slots = 20
//! mean = 10.0
//! std_values = [0.0, 2.0, 5.0, 10.0]
//! trials = 200
//! family = "gamma"   # gamma | bernoulli-scaled | uniform
//! seed = 1           # optional
//!
//! [feasibility]
//! scheme = "sat"     # sat | bet
//! power = 10.0
//! n_values = [1000, 10000, 100000]
//! trials = 200
//! eps = 1.0          # optional, bet only (default power / 10)
//! seed = 1           # optional
//! ```
//!
//! Every problem found is collected so that the user sees all offending
//! keys at once.

use std::collections::BTreeSet;

use ehcomm::arrivals::MeanStdFamily;
use ehcomm::coding::Scheme;
use ehcomm::experiments::{FeasibilityTrendSpec, SweepSpec};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SweepConfig {
    Fig5(SweepSpec),
    Feasibility(FeasibilityTrendSpec),
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid config:")?;
        for p in &self.problems {
            writeln!(f, "  {p}")?;
        }
        Ok(())
    }
}

struct Section<'a> {
    name: &'static str,
    table: &'a toml::Table,
    used: BTreeSet<&'static str>,
    problems: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, table: &'a toml::Table) -> Self {
        Self {
            name,
            table,
            used: BTreeSet::new(),
            problems: Vec::new(),
        }
    }

    fn problem(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.problems.push(format!("{}.{key}: {msg}", self.name));
    }

    fn raw(&mut self, key: &'static str, required: bool) -> Option<&'a toml::Value> {
        self.used.insert(key);
        let v = self.table.get(key);
        if v.is_none() && required {
            self.problem(key, "missing required key");
        }
        v
    }

    fn number(v: &toml::Value) -> Option<f64> {
        match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn f64(&mut self, key: &'static str, required: bool) -> Option<f64> {
        let v = self.raw(key, required)?;
        match Self::number(v) {
            Some(x) if x.is_finite() && x >= 0.0 => Some(x),
            _ => {
                self.problem(key, "expected a non-negative number");
                None
            }
        }
    }

    fn count(&mut self, key: &'static str, required: bool) -> Option<usize> {
        let v = self.raw(key, required)?;
        match v.as_integer() {
            Some(i) if i >= 1 => Some(i as usize),
            _ => {
                self.problem(key, "expected a positive integer");
                None
            }
        }
    }

    fn seed(&mut self) -> Option<u64> {
        let v = self.raw("seed", false)?;
        match v.as_integer() {
            Some(i) if i >= 0 => Some(i as u64),
            _ => {
                self.problem("seed", "expected a non-negative integer");
                None
            }
        }
    }

    fn string(&mut self, key: &'static str, required: bool) -> Option<&'a str> {
        let v = self.raw(key, required)?;
        let s = v.as_str();
        if s.is_none() {
            self.problem(key, "expected a string");
        }
        s
    }

    fn list<T>(&mut self, key: &'static str, item: impl Fn(&toml::Value) -> Option<T>, what: &str) -> Option<Vec<T>> {
        let v = self.raw(key, true)?;
        let Some(arr) = v.as_array() else {
            self.problem(key, format!("expected a list of {what}"));
            return None;
        };
        if arr.is_empty() {
            self.problem(key, "list must not be empty");
            return None;
        }
        let parsed: Option<Vec<T>> = arr.iter().map(item).collect();
        if parsed.is_none() {
            self.problem(key, format!("expected a list of {what}"));
        }
        parsed
    }

    fn finish(mut self) -> Vec<String> {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .cloned()
            .collect();
        for k in unknown {
            self.problem(&k, "unknown key");
        }
        self.problems
    }
}

pub fn parse(text: &str, overrides: Overrides) -> Result<SweepConfig, ConfigError> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        problems: vec![format!("not valid TOML: {}", e.message())],
    })?;

    let mut problems = Vec::new();
    let mut sections = Vec::new();
    for (name, value) in &doc {
        match (name.as_str(), value.as_table()) {
            ("fig5" | "feasibility", Some(t)) => sections.push((name.as_str(), t)),
            ("fig5" | "feasibility", None) => problems.push(format!("{name}: expected a [{name}] section")),
            _ => problems.push(format!("{name}: unknown key")),
        }
    }
    if sections.len() != 1 && problems.is_empty() {
        problems.push(format!(
            "expected exactly one [fig5] or [feasibility] section, found {}",
            sections.len()
        ));
    }
    if !problems.is_empty() {
        return Err(ConfigError { problems });
    }

    let (name, table) = sections[0];
    let parsed = if name == "fig5" {
        parse_fig5(table, overrides)
    } else {
        parse_feasibility(table, overrides)
    };
    parsed.map_err(|problems| ConfigError { problems })
}

fn parse_fig5(table: &toml::Table, overrides: Overrides) -> Result<SweepConfig, Vec<String>> {
    let mut s = Section::new("fig5", table);
    let slots = s.count("slots", true);
    let mean = s.f64("mean", true);
    let std_values = s.list(
        "std_values",
        |v| Section::number(v).filter(|x| x.is_finite() && *x >= 0.0),
        "non-negative numbers",
    );
    let trials = s.count("trials", overrides.trials.is_none());
    let family = match s.string("family", false) {
        None => Some(MeanStdFamily::Gamma),
        Some(f) => match f.parse() {
            Ok(f) => Some(f),
            Err(e) => {
                s.problem("family", e);
                None
            }
        },
    };
    let seed = s.seed();
    let problems = s.finish();
    if !problems.is_empty() {
        return Err(problems);
    }
    let spec = SweepSpec {
        slots: slots.unwrap(),
        mean: mean.unwrap(),
        std_values: std_values.unwrap(),
        trials: overrides.trials.or(trials).unwrap(),
        base_seed: overrides.seed.or(seed).unwrap_or(DEFAULT_SEED),
        family: family.unwrap(),
    };
    spec.validate().map_err(|e| vec![format!("fig5: {e}")])?;
    Ok(SweepConfig::Fig5(spec))
}

fn parse_feasibility(table: &toml::Table, overrides: Overrides) -> Result<SweepConfig, Vec<String>> {
    let mut s = Section::new("feasibility", table);
    let scheme = s.string("scheme", true).and_then(|v| match v.parse::<Scheme>() {
        Ok(sc) => Some(sc),
        Err(e) => {
            s.problem("scheme", e);
            None
        }
    });
    let power = s.f64("power", true);
    let n_values = s.list(
        "n_values",
        |v| v.as_integer().filter(|i| *i >= 1).map(|i| i as usize),
        "positive integers",
    );
    let trials = s.count("trials", overrides.trials.is_none());
    let eps = s.f64("eps", false);
    let seed = s.seed();
    if eps.is_some() && scheme == Some(Scheme::SaveAndTransmit) {
        s.problem("eps", "only meaningful for scheme = \"bet\"");
    }
    let problems = s.finish();
    if !problems.is_empty() {
        return Err(problems);
    }
    let power = power.unwrap();
    let mut spec = FeasibilityTrendSpec::new(
        scheme.unwrap(),
        power,
        n_values.unwrap(),
        overrides.trials.or(trials).unwrap(),
        overrides.seed.or(seed).unwrap_or(DEFAULT_SEED),
    );
    if let Some(eps) = eps {
        if !(eps > 0.0 && eps <= power) {
            return Err(vec![format!("feasibility.eps: must lie in (0, power], got {eps}")]);
        }
        spec = spec.with_eps(eps);
    }
    Ok(SweepConfig::Feasibility(spec))
}
