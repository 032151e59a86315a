//! Strict TOML configuration.
//!
//! Every physical quantity is a string with an explicit unit: times take
//! `s`, `ms`, `us`, `ns` or `ps` (`"15 ns"`), field values take
//! `rad_per_s` (`"1e7 rad_per_s"`). Unknown keys are rejected with a
//! diagnostic naming the key. Each resolved config renders back to TOML
//! with every default filled in, which is what the run manifest stores.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use lama_core::decoherence::DecoherenceParams;
use lama_core::harness::{OscillationKind, OscillationSettings, PriorSpec};
use lama_core::optimizer::PrepChoice;
use lama_core::protocols::{default_kitaev_steps, ProtocolKind, DEFAULT_DT};
use lama_core::{DEFAULT_SIGMA, T_S};
use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

pub const PAPER_GRID_POINTS: usize = 100_000;
pub const PAPER_EXPERIMENTS: usize = 1000;

/// Top-level sections and keys accepted in any config file.
const TOP_LEVEL: [&str; 8] = ["seed", "prior", "decoherence", "gain_curve", "compare", "lama_trace", "oscillations", "optimize"];

pub fn parse_document(text: &str) -> Result<Table> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError(format!("malformed TOML: {}", e.message())))?;
    for key in table.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            return err(format!("unknown key '{key}'"));
        }
    }
    for (key, v) in &table {
        if key != "seed" && !v.is_table() {
            return err(format!("'{key}' must be a section"));
        }
    }
    Ok(table)
}

/// View of one section that records which keys were read.
pub struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    pub fn new(doc: &'a Table, name: &'static str) -> Self {
        Self { name, table: doc.get(name).and_then(Value::as_table), used: RefCell::new(BTreeSet::new()) }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    /// Fails on the first key that was never read.
    pub fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            let used = self.used.borrow();
            if let Some(k) = t.keys().find(|k| !used.contains(*k)) {
                return err(format!("unknown key '{}'", self.path(k)));
            }
        }
        Ok(())
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => err(format!("'{}' must be a string", self.path(key))),
        }
    }

    pub fn time(&self, key: &str, default: f64) -> Result<f64> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => parse_time(s).map_err(|m| ConfigError(format!("'{}': {m}", self.path(key)))),
        }
    }

    pub fn positive_time(&self, key: &str, default: f64) -> Result<f64> {
        let t = self.time(key, default)?;
        if t <= 0.0 {
            return err(format!("'{}' must be positive", self.path(key)));
        }
        Ok(t)
    }

    pub fn times(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => parse_time(s).map_err(|m| ConfigError(format!("'{}': {m}", self.path(key)))),
                    _ => err(format!("'{}' must be a list of time strings", self.path(key))),
                })
                .collect(),
            Some(_) => err(format!("'{}' must be a list of time strings", self.path(key))),
        }
    }

    pub fn rate(&self, key: &str, default: f64) -> Result<f64> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => parse_rate(s).map_err(|m| ConfigError(format!("'{}': {m}", self.path(key)))),
        }
    }

    pub fn integer(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => err(format!("'{}' must be a non-negative integer", self.path(key))),
        }
    }

    pub fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let n = self.integer(key, default as u64)? as usize;
        if n < min {
            return err(format!("'{}' must be at least {min}", self.path(key)));
        }
        Ok(n)
    }

    pub fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Float(x)) if x.is_finite() => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(_) => err(format!("'{}' must be a finite number", self.path(key))),
        }
    }

    pub fn integers(&self, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => err(format!("'{}' must be a list of non-negative integers", self.path(key))),
                })
                .collect(),
            Some(_) => err(format!("'{}' must be a list of non-negative integers", self.path(key))),
        }
    }

    pub fn words(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        match self.get(key) {
            None => Ok(default.iter().map(|s| s.to_string()).collect()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => err(format!("'{}' must be a list of strings", self.path(key))),
                })
                .collect(),
            Some(_) => err(format!("'{}' must be a list of strings", self.path(key))),
        }
    }

    pub fn word(&self, key: &str, default: &str) -> Result<String> {
        Ok(self.string(key)?.unwrap_or(default).to_string())
    }

    pub fn error(&self, key: &str, msg: &str) -> ConfigError {
        ConfigError(format!("'{}': {msg}", self.path(key)))
    }
}

fn split_unit(s: &str) -> std::result::Result<(f64, &str), String> {
    let s = s.trim();
    let (num, unit) = s.split_once(char::is_whitespace).ok_or_else(|| format!("expected '<number> <unit>', got \"{s}\""))?;
    let v: f64 = num.parse().map_err(|_| format!("'{num}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{num}' is not finite"));
    }
    Ok((v, unit.trim()))
}

/// Parses `"<number> <unit>"` with unit `s`, `ms`, `us`, `ns` or `ps` into seconds.
pub fn parse_time(s: &str) -> std::result::Result<f64, String> {
    let (v, unit) = split_unit(s)?;
    let scale = match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" => 1e-6,
        "ns" => 1e-9,
        "ps" => 1e-12,
        _ => return Err(format!("unknown time unit '{unit}' (use s, ms, us, ns or ps)")),
    };
    if v < 0.0 {
        return Err("time must be non-negative".into());
    }
    // Whole-second values skip the multiplication so rendered configs round-trip.
    Ok(if unit == "s" { v } else { v * scale })
}

/// Parses `"<number> rad_per_s"`.
pub fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let (v, unit) = split_unit(s)?;
    if unit != "rad_per_s" {
        return Err(format!("unknown field unit '{unit}' (use rad_per_s)"));
    }
    Ok(v)
}

pub fn render_time(t: f64) -> Value {
    Value::String(format!("{t:e} s"))
}

pub fn render_rate(w: f64) -> Value {
    Value::String(format!("{w:e} rad_per_s"))
}

fn times_value(ts: &[f64]) -> Value {
    Value::Array(ts.iter().map(|&t| render_time(t)).collect())
}

fn int(n: usize) -> Value {
    Value::Integer(n as i64)
}

fn table(entries: Vec<(&str, Value)>) -> Value {
    Value::Table(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorConfig {
    pub mean: f64,
    pub sigma: f64,
    pub span_sigmas: f64,
    pub grid_points: usize,
}

impl PriorConfig {
    pub fn parse(doc: &Table, paper_scale: bool) -> Result<Self> {
        let s = Section::new(doc, "prior");
        let mean = s.rate("mean", 0.0)?;
        let sigma = match (s.has("sigma"), s.has("sigma_period")) {
            (true, true) => return Err(s.error("sigma", "give either sigma or sigma_period, not both")),
            (true, false) => s.rate("sigma", DEFAULT_SIGMA)?,
            (false, true) => {
                let period = s.positive_time("sigma_period", 90e-9)?;
                2.0 * PI / period
            }
            (false, false) => {
                s.get("sigma");
                s.get("sigma_period");
                DEFAULT_SIGMA
            }
        };
        if sigma <= 0.0 {
            return Err(s.error("sigma", "must be positive"));
        }
        let span_sigmas = s.number("span_sigmas", 6.0)?;
        if span_sigmas <= 0.0 {
            return Err(s.error("span_sigmas", "must be positive"));
        }
        let mut grid_points = s.count("grid_points", 8192, 2)?;
        if paper_scale {
            grid_points = PAPER_GRID_POINTS;
        }
        s.finish()?;
        Ok(Self { mean, sigma, span_sigmas, grid_points })
    }

    pub fn spec(&self) -> PriorSpec {
        PriorSpec { mean: self.mean, sigma: self.sigma, span_sigmas: self.span_sigmas, grid_points: self.grid_points }
    }

    fn render(&self) -> Value {
        table(vec![
            ("mean", render_rate(self.mean)),
            ("sigma", render_rate(self.sigma)),
            ("span_sigmas", Value::Float(self.span_sigmas)),
            ("grid_points", int(self.grid_points)),
        ])
    }
}

/// Coherence times; `None` means no decoherence.
fn parse_coherence(doc: &Table, default: &[Option<f64>], allow_list: bool) -> Result<Vec<Option<f64>>> {
    let s = Section::new(doc, "decoherence");
    let one = |v: &Value| -> Result<Option<f64>> {
        match v {
            Value::String(x) if x.trim() == "none" => Ok(None),
            Value::String(x) => match parse_time(x) {
                Ok(t) if t > 0.0 => Ok(Some(t)),
                Ok(_) => Err(s.error("coherence_time", "must be positive")),
                Err(m) => Err(s.error("coherence_time", &m)),
            },
            _ => Err(s.error("coherence_time", "must be a time string or \"none\"")),
        }
    };
    let out = match s.get("coherence_time") {
        None => default.to_vec(),
        Some(Value::Array(items)) if allow_list => {
            if items.is_empty() {
                return Err(s.error("coherence_time", "list must not be empty"));
            }
            items.iter().map(one).collect::<Result<_>>()?
        }
        Some(Value::Array(_)) => return Err(s.error("coherence_time", "this command takes a single coherence time")),
        Some(v) => vec![one(v)?],
    };
    s.finish()?;
    Ok(out)
}

pub fn decoherence(tc: Option<f64>) -> DecoherenceParams {
    match tc {
        Some(t) => DecoherenceParams::from_coherence_time(t).expect("validated at parse time"),
        None => DecoherenceParams::none(),
    }
}

fn render_coherence(tcs: &[Option<f64>]) -> Value {
    let one = |tc: &Option<f64>| tc.map_or(Value::String("none".into()), render_time);
    let v = if tcs.len() == 1 { one(&tcs[0]) } else { Value::Array(tcs.iter().map(one).collect()) };
    table(vec![("coherence_time", v)])
}

fn parse_seed(doc: &Table, cli_seed: Option<u64>) -> Result<u64> {
    let seed = match doc.get("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => return err("'seed' must be a non-negative integer"),
    };
    Ok(cli_seed.unwrap_or(seed))
}

/// Flags that change how a config resolves.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paper_scale: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainCurveConfig {
    pub seed: u64,
    pub prior: PriorConfig,
    pub coherence_time: Option<f64>,
    pub prep: PrepChoice,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_points: usize,
}

impl GainCurveConfig {
    pub fn parse(doc: &Table, o: Overrides) -> Result<Self> {
        let seed = parse_seed(doc, o.seed)?;
        let prior = PriorConfig::parse(doc, o.paper_scale)?;
        let coherence_time = parse_coherence(doc, &[None], false)?[0];
        let s = Section::new(doc, "gain_curve");
        let prep = match s.word("prep", "xy")?.as_str() {
            "balanced" => {
                if s.has("alpha") || s.has("beta") {
                    return Err(s.error("alpha", "only used with prep = \"xy\""));
                }
                PrepChoice::Balanced
            }
            "xy" => PrepChoice::Xy { alpha: s.number("alpha", 0.0)?, beta: s.number("beta", 0.0)? },
            other => return Err(s.error("prep", &format!("unknown preparation '{other}' (use balanced or xy)"))),
        };
        let t_start = s.time("t_start", 0.0)?;
        let t_stop = s.time("t_stop", 5.0 * T_S)?;
        let t_points = s.count("t_points", 76, 0)?;
        if t_stop < t_start {
            return Err(s.error("t_stop", "must not be below t_start"));
        }
        s.finish()?;
        Ok(Self { seed, prior, coherence_time, prep, t_start, t_stop, t_points })
    }

    pub fn sweep(&self) -> Vec<f64> {
        linspace(self.t_start, self.t_stop, self.t_points)
    }

    pub fn render(&self) -> Table {
        let mut section = vec![];
        match self.prep {
            PrepChoice::Balanced => section.push(("prep", Value::String("balanced".into()))),
            PrepChoice::Xy { alpha, beta } => {
                section.push(("prep", Value::String("xy".into())));
                section.push(("alpha", Value::Float(alpha)));
                section.push(("beta", Value::Float(beta)));
            }
        }
        section.push(("t_start", render_time(self.t_start)));
        section.push(("t_stop", render_time(self.t_stop)));
        section.push(("t_points", int(self.t_points)));
        root(self.seed, &self.prior, Some(&[self.coherence_time]), "gain_curve", table(section))
    }
}

fn root(seed: u64, prior: &PriorConfig, coherence: Option<&[Option<f64>]>, name: &str, section: Value) -> Table {
    let mut t = Table::new();
    t.insert("seed".into(), Value::Integer(seed as i64));
    t.insert("prior".into(), prior.render());
    if let Some(c) = coherence {
        t.insert("decoherence".into(), render_coherence(c));
    }
    t.insert(name.into(), section);
    t
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareConfig {
    pub seed: u64,
    pub prior: PriorConfig,
    pub coherence_times: Vec<Option<f64>>,
    pub protocols: Vec<ProtocolKind>,
    pub n_experiments: usize,
    pub n_steps: usize,
    pub t1: f64,
    pub dt: f64,
    pub fourier_t1: Vec<f64>,
    /// `None` picks the largest count with the last delay within 10·T_c.
    pub kitaev_steps: Option<usize>,
    pub delay_floor: f64,
    pub alpha_window_decades: f64,
}

impl CompareConfig {
    pub fn parse(doc: &Table, o: Overrides) -> Result<Self> {
        let seed = parse_seed(doc, o.seed)?;
        let prior = PriorConfig::parse(doc, o.paper_scale)?;
        let coherence_times = parse_coherence(doc, &[Some(5e-6)], true)?;
        let s = Section::new(doc, "compare");
        let protocols = s
            .words("protocols", &["lama", "classical", "kitaev", "fourier", "fourier_modified"])?
            .iter()
            .map(|w| w.parse::<ProtocolKind>().map_err(|e| s.error("protocols", &e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if protocols.is_empty() {
            return Err(s.error("protocols", "list must not be empty"));
        }
        let mut n_experiments = s.count("n_experiments", 200, 1)?;
        if o.paper_scale {
            n_experiments = PAPER_EXPERIMENTS;
        }
        let n_steps = s.count("n_steps", 50, 1)?;
        let t1 = s.positive_time("t1", T_S)?;
        let dt = s.positive_time("dt", DEFAULT_DT)?;
        let fourier_t1 = s.times("fourier_t1", vec![0.5e-6, 2.4e-6, 5e-6])?;
        if fourier_t1.iter().any(|&t| t <= 0.0) {
            return Err(s.error("fourier_t1", "entries must be positive"));
        }
        let kitaev_steps = if s.has("kitaev_steps") { Some(s.count("kitaev_steps", 1, 1)?) } else { None };
        let delay_floor = s.time("delay_floor", T_S)?;
        let alpha_window_decades = s.number("alpha_window_decades", 0.5)?;
        if alpha_window_decades <= 0.0 {
            return Err(s.error("alpha_window_decades", "must be positive"));
        }
        s.finish()?;
        Ok(Self {
            seed,
            prior,
            coherence_times,
            protocols,
            n_experiments,
            n_steps,
            t1,
            dt,
            fourier_t1,
            kitaev_steps,
            delay_floor,
            alpha_window_decades,
        })
    }

    pub fn kitaev_steps_for(&self, tc: Option<f64>) -> usize {
        self.kitaev_steps.unwrap_or_else(|| match tc {
            Some(tc) => default_kitaev_steps(self.t1, tc),
            None => self.n_steps,
        })
    }

    pub fn render(&self) -> Table {
        let mut section = vec![
            ("protocols", Value::Array(self.protocols.iter().map(|p| Value::String(p.name().into())).collect())),
            ("n_experiments", int(self.n_experiments)),
            ("n_steps", int(self.n_steps)),
            ("t1", render_time(self.t1)),
            ("dt", render_time(self.dt)),
            ("fourier_t1", times_value(&self.fourier_t1)),
        ];
        if let Some(k) = self.kitaev_steps {
            section.push(("kitaev_steps", int(k)));
        }
        section.push(("delay_floor", render_time(self.delay_floor)));
        section.push(("alpha_window_decades", Value::Float(self.alpha_window_decades)));
        root(self.seed, &self.prior, Some(&self.coherence_times), "compare", table(section))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LamaTraceConfig {
    pub seed: u64,
    pub prior: PriorConfig,
    pub coherence_time: Option<f64>,
    pub outcomes: Vec<usize>,
    pub t1: f64,
    pub dt: f64,
    pub t_stop: f64,
    pub t_points: usize,
}

impl LamaTraceConfig {
    pub fn parse(doc: &Table, o: Overrides) -> Result<Self> {
        let seed = parse_seed(doc, o.seed)?;
        let prior = PriorConfig::parse(doc, o.paper_scale)?;
        let coherence_time = parse_coherence(doc, &[None], false)?[0];
        let s = Section::new(doc, "lama_trace");
        let outcomes = s.integers("outcomes", vec![0; 6])?;
        if let Some(bad) = outcomes.iter().find(|&&x| x > 2) {
            return Err(s.error("outcomes", &format!("outcome {bad} is not 0, 1 or 2")));
        }
        if s.has("n_steps") {
            let n = s.count("n_steps", 0, 0)?;
            if n != outcomes.len() {
                return Err(s.error("outcomes", &format!("has {} entries but n_steps = {n}", outcomes.len())));
            }
        } else {
            s.get("n_steps");
        }
        let t1 = s.positive_time("t1", T_S)?;
        let dt = s.positive_time("dt", DEFAULT_DT)?;
        let t_stop = s.positive_time("t_stop", 400e-9)?;
        let t_points = s.count("t_points", 201, 0)?;
        s.finish()?;
        Ok(Self { seed, prior, coherence_time, outcomes, t1, dt, t_stop, t_points })
    }

    pub fn render(&self) -> Table {
        let section = vec![
            ("outcomes", Value::Array(self.outcomes.iter().map(|&x| int(x)).collect())),
            ("n_steps", int(self.outcomes.len())),
            ("t1", render_time(self.t1)),
            ("dt", render_time(self.dt)),
            ("t_stop", render_time(self.t_stop)),
            ("t_points", int(self.t_points)),
        ];
        root(self.seed, &self.prior, Some(&[self.coherence_time]), "lama_trace", table(section))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationsConfig {
    pub seed: u64,
    pub prior: PriorConfig,
    pub kind: OscillationKind,
    /// Ω or ω_c in rad/s, or grid point counts.
    pub variants: Vec<f64>,
    pub samples_per_period: usize,
    pub periods: f64,
    pub min_prominence: f64,
}

impl OscillationsConfig {
    pub fn parse(doc: &Table, o: Overrides) -> Result<Self> {
        let seed = parse_seed(doc, o.seed)?;
        let prior = PriorConfig::parse(doc, o.paper_scale)?;
        let s = Section::new(doc, "oscillations");
        let kind = match s.word("kind", "edge")?.as_str() {
            "edge" => OscillationKind::Edge,
            "center" => OscillationKind::Center,
            "discreteness" => OscillationKind::Discreteness,
            other => return Err(s.error("kind", &format!("unknown kind '{other}' (use edge, center or discreteness)"))),
        };
        let variants = match kind {
            OscillationKind::Discreteness => {
                let v = s.integers("variants", vec![512, 256])?;
                if v.iter().any(|&m| m < 2) {
                    return Err(s.error("variants", "grid sizes must be at least 2"));
                }
                v.into_iter().map(|m| m as f64).collect()
            }
            _ => {
                let default = match kind {
                    OscillationKind::Edge => [20.0, 40.0],
                    _ => [10.0, 20.0],
                };
                let words = s.words("variants", &[])?;
                if words.is_empty() && !s.has("variants") {
                    default.iter().map(|k| k * prior.sigma).collect()
                } else {
                    words
                        .iter()
                        .map(|w| parse_field_or_sigma(w, prior.sigma).map_err(|m| s.error("variants", &m)))
                        .collect::<Result<Vec<_>>>()?
                }
            }
        };
        if variants.is_empty() {
            return Err(s.error("variants", "list must not be empty"));
        }
        if variants.contains(&0.0) {
            return Err(s.error("variants", "entries must be nonzero"));
        }
        let d = OscillationSettings::default();
        let samples_per_period = s.count("samples_per_period", d.samples_per_period, 4)?;
        let periods = s.number("periods", d.periods)?;
        let min_prominence = s.number("min_prominence", d.min_prominence)?;
        if periods <= 0.0 || min_prominence < 0.0 {
            return Err(s.error("periods", "periods must be positive and min_prominence non-negative"));
        }
        s.finish()?;
        Ok(Self { seed, prior, kind, variants, samples_per_period, periods, min_prominence })
    }

    pub fn settings(&self) -> OscillationSettings {
        OscillationSettings {
            sigma: self.prior.sigma,
            grid_points: self.prior.grid_points,
            samples_per_period: self.samples_per_period,
            periods: self.periods,
            min_prominence: self.min_prominence,
        }
    }

    pub fn render(&self) -> Table {
        let variants = match self.kind {
            OscillationKind::Discreteness => Value::Array(self.variants.iter().map(|&v| int(v as usize)).collect()),
            _ => Value::Array(self.variants.iter().map(|&v| render_rate(v)).collect()),
        };
        let section = vec![
            ("kind", Value::String(self.kind.name().into())),
            ("variants", variants),
            ("samples_per_period", int(self.samples_per_period)),
            ("periods", Value::Float(self.periods)),
            ("min_prominence", Value::Float(self.min_prominence)),
        ];
        root(self.seed, &self.prior, None, "oscillations", table(section))
    }
}

/// `"<x> rad_per_s"` or `"<k> sigma"` (multiples of the prior width).
fn parse_field_or_sigma(s: &str, sigma: f64) -> std::result::Result<f64, String> {
    let (v, unit) = split_unit(s)?;
    match unit {
        "rad_per_s" => Ok(v),
        "sigma" => Ok(v * sigma),
        _ => Err(format!("unknown field unit '{unit}' (use rad_per_s or sigma)")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeConfig {
    pub seed: u64,
    pub prior: PriorConfig,
    pub coherence_time: Option<f64>,
    pub delays: Vec<f64>,
    pub starts: usize,
    pub budget: usize,
    pub bound: f64,
}

impl OptimizeConfig {
    pub fn parse(doc: &Table, o: Overrides) -> Result<Self> {
        let seed = parse_seed(doc, o.seed)?;
        let prior = PriorConfig::parse(doc, o.paper_scale)?;
        let coherence_time = parse_coherence(doc, &[None], false)?[0];
        let s = Section::new(doc, "optimize");
        let delays = s.times("t", vec![T_S, 5.0 * T_S])?;
        let starts = s.count("starts", 16, 1)?;
        let budget = s.count("budget", 1500, 100)?;
        let bound = s.number("bound", PI)?;
        if bound <= 0.0 {
            return Err(s.error("bound", "must be positive"));
        }
        s.finish()?;
        Ok(Self { seed, prior, coherence_time, delays, starts, budget, bound })
    }

    pub fn render(&self) -> Table {
        let section = vec![
            ("t", times_value(&self.delays)),
            ("starts", int(self.starts)),
            ("budget", int(self.budget)),
            ("bound", Value::Float(self.bound)),
        ];
        root(self.seed, &self.prior, Some(&[self.coherence_time]), "optimize", table(section))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Table {
        parse_document(s).unwrap()
    }

    #[test]
    fn time_units() {
        assert_eq!(parse_time("15 ns").unwrap(), 15.0 * 1e-9);
        assert_eq!(parse_time("2.4 us").unwrap(), 2.4 * 1e-6);
        assert_eq!(parse_time("1.5e-8 s").unwrap(), 1.5e-8);
        assert!(parse_time("15").is_err());
        assert!(parse_time("15 min").is_err());
        assert!(parse_time("-1 ns").is_err());
        assert!(parse_time("abc ns").is_err());
        assert_eq!(parse_rate("1e7 rad_per_s").unwrap(), 1e7);
        assert!(parse_rate("1e7 Hz").is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = GainCurveConfig::parse(&doc("[gain_curve]\nt_stopp = \"1 ns\"\n"), Overrides::default()).unwrap_err();
        assert_eq!(e.0, "unknown key 'gain_curve.t_stopp'");
        let e = parse_document("[priors]\n").unwrap_err();
        assert_eq!(e.0, "unknown key 'priors'");
        let e = GainCurveConfig::parse(&doc("[prior]\nsigma_period = \"90 parsecs\"\n"), Overrides::default()).unwrap_err();
        assert!(e.0.starts_with("'prior.sigma_period'"), "{}", e.0);
    }

    #[test]
    fn sigma_period_conversion() {
        let c = GainCurveConfig::parse(&doc("[prior]\nsigma_period = \"90 ns\"\n"), Overrides::default()).unwrap();
        assert!((c.prior.sigma - DEFAULT_SIGMA).abs() < 1e-6 * DEFAULT_SIGMA);
        assert!(GainCurveConfig::parse(&doc("[prior]\nsigma_period = \"90 ns\"\nsigma = \"1 rad_per_s\"\n"), Overrides::default()).is_err());
    }

    #[test]
    fn rendered_configs_round_trip() {
        let o = Overrides { seed: Some(9), paper_scale: false };
        let g = GainCurveConfig::parse(&doc("[gain_curve]\nprep = \"balanced\"\nt_stop = \"40 ns\"\n"), o).unwrap();
        let text = toml::to_string(&g.render()).unwrap();
        assert_eq!(GainCurveConfig::parse(&doc(&text), Overrides::default()).unwrap(), g);

        let c = CompareConfig::parse(&doc("[decoherence]\ncoherence_time = [\"5 us\", \"10 us\"]\n"), o).unwrap();
        let text = toml::to_string(&c.render()).unwrap();
        assert_eq!(CompareConfig::parse(&doc(&text), Overrides::default()).unwrap(), c);

        let l = LamaTraceConfig::parse(&doc("[lama_trace]\noutcomes = [1, 2, 0]\n"), o).unwrap();
        let text = toml::to_string(&l.render()).unwrap();
        assert_eq!(LamaTraceConfig::parse(&doc(&text), Overrides::default()).unwrap(), l);

        let s = OscillationsConfig::parse(&doc("[oscillations]\nkind = \"center\"\nvariants = [\"10 sigma\", \"2e9 rad_per_s\"]\n"), o).unwrap();
        let text = toml::to_string(&s.render()).unwrap();
        assert_eq!(OscillationsConfig::parse(&doc(&text), Overrides::default()).unwrap(), s);

        let p = OptimizeConfig::parse(&doc("[optimize]\nt = [\"75 ns\"]\n"), o).unwrap();
        let text = toml::to_string(&p.render()).unwrap();
        assert_eq!(OptimizeConfig::parse(&doc(&text), Overrides::default()).unwrap(), p);
    }

    #[test]
    fn outcome_list_checks() {
        let o = Overrides::default();
        let e = LamaTraceConfig::parse(&doc("[lama_trace]\noutcomes = [0, 0]\nn_steps = 3\n"), o).unwrap_err();
        assert!(e.0.contains("lama_trace.outcomes"), "{}", e.0);
        assert!(LamaTraceConfig::parse(&doc("[lama_trace]\noutcomes = [0, 3]\n"), o).is_err());
        assert!(LamaTraceConfig::parse(&doc("[lama_trace]\noutcomes = []\n"), o).unwrap().outcomes.is_empty());
    }

    #[test]
    fn paper_scale_overrides_sizes() {
        let o = Overrides { seed: None, paper_scale: true };
        let c = CompareConfig::parse(&doc("[compare]\nn_experiments = 5\n"), o).unwrap();
        assert_eq!((c.n_experiments, c.prior.grid_points), (PAPER_EXPERIMENTS, PAPER_GRID_POINTS));
    }

    #[test]
    fn seed_precedence() {
        let d = doc("seed = 4\n");
        assert_eq!(GainCurveConfig::parse(&d, Overrides::default()).unwrap().seed, 4);
        assert_eq!(GainCurveConfig::parse(&d, Overrides { seed: Some(8), paper_scale: false }).unwrap().seed, 8);
        assert!(parse_document("seed = \"x\"\n").is_ok());
        assert!(GainCurveConfig::parse(&doc("seed = -1\n"), Overrides::default()).is_err());
    }
}
