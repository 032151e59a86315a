//! Step schedules for the five estimation procedures and the
//! preparation-exposure-readout loop that drives them.
//!
//! | kind              | delay t_i             | preparation                   |
//! |-------------------|-----------------------|-------------------------------|
//! | `Lama`            | t₁ + (i−1)·Δt         | xy_state(0, 0)                |
//! | `Classical`       | t₁                    | xy_state(0, 0)                |
//! | `Kitaev`          | t₁·3^{i−1}            | balanced                      |
//! | `Fourier`         | t₁/3^{i−1}            | phase ramp with feedback α_i  |
//! | `FourierModified` | t₁/3^{i−1}            | (½, e^{iα}/√2, e^{2iα}/2)     |
//!
//! Every readout is the qutrit Fourier gate. Only the two Fourier variants
//! feed earlier outcomes back into the preparation, so all schedules of
//! delays are outcome-independent.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bayes::{entropy, expected_gain_from_table, marginal_outcomes, update_with_outcome, FieldDistribution, GainRecord};
use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::likelihood::OutcomeModel;
use crate::qudit::{fourier_gate, xy_state, QuditState, UnitaryMatrix};
use crate::T_S;

/// Default LAMA delay increment.
pub const DEFAULT_DT: f64 = 40e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Lama,
    Classical,
    Kitaev,
    Fourier,
    FourierModified,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Lama,
        ProtocolKind::Classical,
        ProtocolKind::Kitaev,
        ProtocolKind::Fourier,
        ProtocolKind::FourierModified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Lama => "lama",
            ProtocolKind::Classical => "classical",
            ProtocolKind::Kitaev => "kitaev",
            ProtocolKind::Fourier => "fourier",
            ProtocolKind::FourierModified => "fourier_modified",
        }
    }

    pub fn is_fourier(self) -> bool {
        matches!(self, ProtocolKind::Fourier | ProtocolKind::FourierModified)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown protocol '{s}' (expected lama, classical, kitaev, fourier or fourier_modified)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// First delay, s.
    pub t1: f64,
    /// Delay increment per step, s. Used by LAMA only.
    pub dt: f64,
    pub n_steps: usize,
    /// Qudit dimension. The preparations are defined for 3 only.
    pub base: usize,
    pub decoherence: DecoherenceParams,
    /// Fourier schedules stop before the first delay below this value, s.
    pub delay_floor: f64,
}

impl ProtocolConfig {
    /// Defaults: t₁ = T_s, Δt = 40 ns, no decoherence.
    pub fn new(kind: ProtocolKind, n_steps: usize) -> Self {
        Self {
            kind,
            t1: T_S,
            dt: DEFAULT_DT,
            n_steps,
            base: 3,
            decoherence: DecoherenceParams::none(),
            delay_floor: T_S,
        }
    }

    pub fn with_t1(mut self, t1: f64) -> Self {
        self.t1 = t1;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_decoherence(mut self, decoherence: DecoherenceParams) -> Self {
        self.decoherence = decoherence;
        self
    }

    pub fn with_delay_floor(mut self, floor: f64) -> Self {
        self.delay_floor = floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::invalid(format!("t1 must be positive, got {}", self.t1)));
        }
        if self.kind == ProtocolKind::Lama && !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.base != 3 {
            return Err(Error::QutritOnly(self.base));
        }
        if !(self.delay_floor >= 0.0 && self.delay_floor.is_finite()) {
            return Err(Error::invalid(format!("delay floor must be non-negative, got {}", self.delay_floor)));
        }
        Ok(())
    }

    /// Number of steps actually executed: `n_steps`, cut short for the
    /// Fourier variants once the delay would drop below the floor.
    pub fn effective_steps(&self) -> usize {
        if !self.kind.is_fourier() {
            return self.n_steps;
        }
        (1..=self.n_steps).take_while(|&i| self.delay(i) >= self.delay_floor * (1.0 - 1e-12)).count()
    }

    /// Delay of step `i` (1-based).
    pub fn delay(&self, i: usize) -> f64 {
        let k = i.saturating_sub(1);
        match self.kind {
            ProtocolKind::Lama => self.t1 + k as f64 * self.dt,
            ProtocolKind::Classical => self.t1,
            ProtocolKind::Kitaev => self.t1 * 3f64.powi(k as i32),
            ProtocolKind::Fourier | ProtocolKind::FourierModified => self.t1 / 3f64.powi(k as i32),
        }
    }

    /// Cumulative phase accumulation time after each executed step.
    pub fn t_phi_schedule(&self) -> Vec<f64> {
        let mut acc = 0.0;
        (1..=self.effective_steps())
            .map(|i| {
                acc += self.delay(i);
                acc
            })
            .collect()
    }
}

/// Largest Kitaev step count whose last delay stays within `10·T_c`.
pub fn default_kitaev_steps(t1: f64, coherence_time: f64) -> usize {
    let mut n = 1;
    while t1 * 3f64.powi(n) <= 10.0 * coherence_time {
        n += 1;
    }
    n as usize
}

/// One preparation-exposure-readout step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepPlan {
    pub delay: f64,
    pub prep: QuditState,
    pub readout: UnitaryMatrix,
}

fn f3() -> UnitaryMatrix {
    fourier_gate(3).expect("d = 3 is valid")
}

fn check_index(i: usize) -> Result<()> {
    if i == 0 {
        return Err(Error::invalid("step indices start at 1"));
    }
    Ok(())
}

pub fn lama_step(i: usize, config: &ProtocolConfig) -> Result<StepPlan> {
    check_index(i)?;
    Ok(StepPlan { delay: config.t1 + (i - 1) as f64 * config.dt, prep: xy_state(0.0, 0.0), readout: f3() })
}

pub fn classical_step(i: usize, config: &ProtocolConfig) -> Result<StepPlan> {
    check_index(i)?;
    Ok(StepPlan { delay: config.t1, prep: xy_state(0.0, 0.0), readout: f3() })
}

pub fn kitaev_step(i: usize, config: &ProtocolConfig) -> Result<StepPlan> {
    check_index(i)?;
    Ok(StepPlan { delay: config.t1 * 3f64.powi(i as i32 - 1), prep: QuditState::balanced(3)?, readout: f3() })
}

/// Feedback phase `α_i = −(2π/3) Σ_{j≥1} ξ_{i−j}/3^j` from the outcomes of
/// steps `1..i`.
pub fn fourier_phase(i: usize, previous_outcomes: &[usize]) -> Result<f64> {
    check_index(i)?;
    if previous_outcomes.len() < i - 1 {
        return Err(Error::invalid(format!("step {i} needs {} previous outcomes, got {}", i - 1, previous_outcomes.len())));
    }
    let sum: f64 = (1..i).map(|j| previous_outcomes[i - 1 - j] as f64 / 3f64.powi(j as i32)).sum();
    Ok(-2.0 * PI / 3.0 * sum)
}

pub fn fourier_step(i: usize, config: &ProtocolConfig, previous_outcomes: &[usize]) -> Result<StepPlan> {
    let alpha = fourier_phase(i, previous_outcomes)?;
    Ok(StepPlan { delay: config.t1 / 3f64.powi(i as i32 - 1), prep: QuditState::phase_ramp(3, alpha)?, readout: f3() })
}

/// As [`fourier_step`] but with the maximal transverse-spin preparation
/// (½, e^{iα}/√2, e^{2iα}/2).
pub fn modified_fourier_step(i: usize, config: &ProtocolConfig, previous_outcomes: &[usize]) -> Result<StepPlan> {
    let alpha = fourier_phase(i, previous_outcomes)?;
    Ok(StepPlan { delay: config.t1 / 3f64.powi(i as i32 - 1), prep: xy_state(alpha, -alpha), readout: f3() })
}

pub fn plan_step(i: usize, config: &ProtocolConfig, previous_outcomes: &[usize]) -> Result<StepPlan> {
    match config.kind {
        ProtocolKind::Lama => lama_step(i, config),
        ProtocolKind::Classical => classical_step(i, config),
        ProtocolKind::Kitaev => kitaev_step(i, config),
        ProtocolKind::Fourier => fourier_step(i, config, previous_outcomes),
        ProtocolKind::FourierModified => modified_fourier_step(i, config, previous_outcomes),
    }
}

/// How simulated outcomes are produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeMode {
    /// Sample from the current posterior's marginal outcome distribution.
    Predictive,
    /// Sample from `P(ξ | ω*)` for a fixed true field.
    FixedField(f64),
    /// Replay a given outcome sequence. Must cover every executed step.
    Scripted(Vec<usize>),
}

/// Everything recorded about one executed step except the posterior.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSummary {
    pub plan: StepPlan,
    pub outcome: usize,
    /// Distribution the outcome was drawn from (the marginal in predictive
    /// and scripted modes).
    pub outcome_probabilities: Vec<f64>,
    /// Expected gain of this step under the distribution before it, bits.
    pub expected_gain_bits: f64,
    pub gain: GainRecord,
    /// Phase accumulation time after this step, s.
    pub t_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    #[serde(flatten)]
    pub summary: StepSummary,
    pub posterior: FieldDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolTrajectory {
    pub config: ProtocolConfig,
    pub prior_entropy: f64,
    pub steps: Vec<StepRecord>,
}

impl ProtocolTrajectory {
    pub fn phase_accumulation_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.summary.t_phi)
    }

    pub fn total_gain_bits(&self) -> f64 {
        self.steps.iter().map(|s| s.summary.gain.gain_bits).sum()
    }

    pub fn outcomes(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.summary.outcome).collect()
    }
}

/// Step-by-step driver. Holds only the current posterior so long ensembles
/// do not keep every intermediate distribution alive.
pub struct ProtocolRun {
    config: ProtocolConfig,
    mode: OutcomeMode,
    rng: ChaCha8Rng,
    posterior: FieldDistribution,
    outcomes: Vec<usize>,
    t_phi: f64,
    n_steps: usize,
}

impl ProtocolRun {
    pub fn new(config: &ProtocolConfig, prior: &FieldDistribution, seed: u64, mode: OutcomeMode) -> Result<Self> {
        config.validate()?;
        let n_steps = config.effective_steps();
        if let OutcomeMode::Scripted(script) = &mode {
            if script.len() != n_steps {
                return Err(Error::invalid(format!(
                    "outcome script has {} entries but the schedule runs {n_steps} steps",
                    script.len()
                )));
            }
            if let Some(bad) = script.iter().find(|&&x| x >= config.base) {
                return Err(Error::invalid(format!("scripted outcome {bad} is not below d = {}", config.base)));
            }
        }
        if let OutcomeMode::FixedField(w) = mode {
            if !w.is_finite() {
                return Err(Error::invalid("fixed field must be finite"));
            }
        }
        Ok(Self {
            config: config.clone(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            posterior: prior.clone(),
            outcomes: Vec::with_capacity(n_steps),
            t_phi: 0.0,
            n_steps,
        })
    }

    pub fn posterior(&self) -> &FieldDistribution {
        &self.posterior
    }

    pub fn steps_remaining(&self) -> usize {
        self.n_steps - self.outcomes.len()
    }

    /// Executes the next step, or returns `None` once the schedule is done.
    pub fn advance(&mut self) -> Result<Option<StepSummary>> {
        if self.steps_remaining() == 0 {
            return Ok(None);
        }
        let i = self.outcomes.len() + 1;
        self.step(i).map(Some).map_err(|e| e.at_step(i))
    }

    fn step(&mut self, i: usize) -> Result<StepSummary> {
        let plan = plan_step(i, &self.config, &self.outcomes)?;
        let model = OutcomeModel::new(&plan.prep, &plan.readout, plan.delay, &self.config.decoherence)?;
        let table = model.tabulate(self.posterior.grid());
        let expected_gain_bits = expected_gain_from_table(&self.posterior, &table);

        let (outcome, outcome_probabilities) = match &self.mode {
            OutcomeMode::Predictive => {
                let p = marginal_outcomes(&self.posterior, &table);
                (sample(&mut self.rng, &p)?, p)
            }
            OutcomeMode::FixedField(w) => {
                let p = model.probabilities(*w);
                (sample(&mut self.rng, &p)?, p)
            }
            OutcomeMode::Scripted(script) => (script[i - 1], marginal_outcomes(&self.posterior, &table)),
        };

        let before = entropy(&self.posterior);
        self.posterior = update_with_outcome(&self.posterior, &table, outcome)?;
        let after = entropy(&self.posterior);
        self.outcomes.push(outcome);
        self.t_phi += plan.delay;
        Ok(StepSummary {
            plan,
            outcome,
            outcome_probabilities,
            expected_gain_bits,
            gain: GainRecord::new(i, before, after),
            t_phi: self.t_phi,
        })
    }
}

fn sample(rng: &mut ChaCha8Rng, p: &[f64]) -> Result<usize> {
    let dist = WeightedIndex::new(p).map_err(|e| Error::invalid(format!("cannot sample outcome: {e}")))?;
    Ok(dist.sample(rng))
}

/// Runs a full trajectory, keeping every posterior.
pub fn run_protocol(
    config: &ProtocolConfig,
    prior: &FieldDistribution,
    seed: u64,
    mode: OutcomeMode,
) -> Result<ProtocolTrajectory> {
    let mut run = ProtocolRun::new(config, prior, seed, mode)?;
    let mut steps = Vec::with_capacity(run.steps_remaining());
    while let Some(summary) = run.advance()? {
        steps.push(StepRecord { summary, posterior: run.posterior().clone() });
    }
    Ok(ProtocolTrajectory { config: config.clone(), prior_entropy: entropy(prior), steps })
}
