//! Derivative-free maximization of the expected information gain over the
//! preparation and readout pulse parameters.
//!
//! Local search is a bounded Nelder–Mead simplex: trial points are clamped
//! to the box, and a start stops when the simplex collapses or its
//! evaluation budget runs out. Starts are drawn uniformly in the box from a
//! seeded stream, run in parallel, and reduced in start order, so the first
//! start reaching the best value wins ties.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{expected_gain_from_table, FieldDistribution};
use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::likelihood::OutcomeModel;
use crate::qudit::{fourier_gate, prep_from_pulse, xy_state, PulseParams, QuditState, UnitaryMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimizerSettings {
    pub starts: usize,
    /// Objective evaluations allowed per start.
    pub budget: usize,
    pub seed: u64,
    /// Half-width of the search box `[−bound, bound]` for every parameter.
    pub bound: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { starts: 8, budget: 600, seed: 0, bound: PI }
    }
}

impl OptimizerSettings {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::invalid("optimizer needs at least one start"));
        }
        if self.budget <= dim {
            return Err(Error::invalid(format!("budget {} cannot build a {dim}-dimensional simplex", self.budget)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::invalid(format!("search bound must be positive, got {}", self.bound)));
        }
        Ok(())
    }
}

/// Outcome of one bounded simplex search (minimization).
#[derive(Clone, Debug)]
pub struct LocalSearch<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Minimizes `f` over the box `[lo, hi]^N` starting from `x0`.
pub fn nelder_mead<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64,
    x0: [f64; N],
    lo: f64,
    hi: f64,
    budget: usize,
) -> LocalSearch<N> {
    const STEP: f64 = 0.5;
    const XTOL: f64 = 1e-9;
    const FTOL: f64 = 1e-13;
    let clamp = |mut x: [f64; N]| {
        x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        x
    };
    let count = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; N]| {
        count.set(count.get() + 1);
        f(x)
    };

    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let x0 = clamp(x0);
    simplex.push((x0, eval(&x0)));
    for i in 0..N {
        let mut x = x0;
        // Step inward when the start sits on the upper face.
        x[i] += if x[i] + STEP <= hi { STEP } else { -STEP };
        let x = clamp(x);
        simplex.push((x, eval(&x)));
    }

    let mut history = Vec::new();
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let spread = simplex[N].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= FTOL && size <= XTOL {
            converged = true;
            break;
        }
        if count.get() + 2 > budget {
            break;
        }

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / N as f64;
            }
        }
        let along = |t: f64| {
            let mut x = [0.0; N];
            for i in 0..N {
                x[i] = centroid[i] + t * (simplex[N].0[i] - centroid[i]);
            }
            clamp(x)
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[N].1 {
                let x = along(-0.5);
                (x, eval(&x))
            } else {
                let x = along(0.5);
                (x, eval(&x))
            };
            if fc < simplex[N].1.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                if count.get() + N > budget {
                    break;
                }
                let best = simplex[0].0;
                for (x, fx) in simplex[1..].iter_mut() {
                    for i in 0..N {
                        x[i] = best[i] + 0.5 * (x[i] - best[i]);
                    }
                    *fx = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let evaluations = count.get();
    LocalSearch { x: simplex[0].0, value: simplex[0].1, evaluations, budget_exhausted: !converged, history }
}

struct MultiStart<const N: usize> {
    best: LocalSearch<N>,
    evaluations: usize,
    budget_exhausted: bool,
    start_values: Vec<f64>,
    start_bests: Vec<f64>,
}

fn multistart<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64 + Sync,
    settings: &OptimizerSettings,
) -> Result<MultiStart<N>> {
    settings.validate(N)?;
    let b = settings.bound;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let starts: Vec<[f64; N]> = (0..settings.starts)
        .map(|_| std::array::from_fn(|_| rng.random_range(-b..=b)))
        .collect();
    let runs: Vec<(f64, LocalSearch<N>)> =
        starts.par_iter().map(|x0| (f(x0), nelder_mead(&f, *x0, -b, b, settings.budget))).collect();

    let evaluations = runs.iter().map(|(_, r)| r.evaluations).sum();
    let budget_exhausted = runs.iter().any(|(_, r)| r.budget_exhausted);
    let start_values = runs.iter().map(|(v, _)| *v).collect();
    let start_bests = runs.iter().map(|(_, r)| r.value).collect();
    let mut best: Option<LocalSearch<N>> = None;
    for (_, r) in runs {
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    Ok(MultiStart { best: best.expect("at least one start"), evaluations, budget_exhausted, start_values, start_bests })
}

fn gain(dist: &FieldDistribution, t: f64, prep: &QuditState, readout: &UnitaryMatrix, params: &DecoherenceParams) -> f64 {
    match OutcomeModel::new(prep, readout, t, params) {
        Ok(model) => expected_gain_from_table(dist, &model.tabulate(dist.grid())),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_params: PulseParams,
    /// bits
    pub best_gain: f64,
    pub n_evaluations: usize,
    pub starts: usize,
    pub budget_exhausted: bool,
    /// Gain at each random start point, in start order.
    pub start_gains: Vec<f64>,
    /// Best gain reached from each start.
    pub start_bests: Vec<f64>,
}

/// Maximizes the expected gain of one step over all six pulse parameters.
pub fn optimize_step_params(
    dist: &FieldDistribution,
    t: f64,
    decoherence: &DecoherenceParams,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    check_delay(t)?;
    let objective = |x: &[f64; 6]| {
        let p = PulseParams::from_array(*x);
        -gain(dist, t, &p.prep_state(), &p.readout(), decoherence)
    };
    let run = multistart(objective, settings)?;
    Ok(OptimizationResult {
        best_params: PulseParams::from_array(run.best.x),
        best_gain: -run.best.value,
        n_evaluations: run.evaluations,
        starts: settings.starts,
        budget_exhausted: run.budget_exhausted,
        start_gains: run.start_values.iter().map(|v| -v).collect(),
        start_bests: run.start_bests.iter().map(|v| -v).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrepOptimizationResult {
    /// (ε, Δ₁, Δ₂) of the preparation pulse.
    pub prep_params: [f64; 3],
    pub prep: QuditState,
    /// bits
    pub best_gain: f64,
    pub n_evaluations: usize,
    pub budget_exhausted: bool,
}

/// Maximizes the expected gain over the preparation pulse alone, with the
/// readout fixed to the Fourier gate.
pub fn optimize_prep_for_fourier_readout(
    dist: &FieldDistribution,
    t: f64,
    decoherence: &DecoherenceParams,
    settings: &OptimizerSettings,
) -> Result<PrepOptimizationResult> {
    check_delay(t)?;
    let f3 = fourier_gate(3)?;
    let objective = |x: &[f64; 3]| -gain(dist, t, &prep_from_pulse(x[0], x[1], x[2]), &f3, decoherence);
    let run = multistart(objective, settings)?;
    let x = run.best.x;
    Ok(PrepOptimizationResult {
        prep_params: x,
        prep: prep_from_pulse(x[0], x[1], x[2]),
        best_gain: -run.best.value,
        n_evaluations: run.evaluations,
        budget_exhausted: run.budget_exhausted,
    })
}

fn check_delay(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("delay time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// Fixed preparation choices for gain landscapes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepChoice {
    Balanced,
    Xy { alpha: f64, beta: f64 },
}

impl PrepChoice {
    pub fn state(&self) -> QuditState {
        match *self {
            PrepChoice::Balanced => QuditState::balanced(3).expect("d = 3 is valid"),
            PrepChoice::Xy { alpha, beta } => xy_state(alpha, beta),
        }
    }
}

/// First-step expected gain (bits) versus delay for a fixed preparation and
/// Fourier readout.
pub fn gain_landscape(
    dist: &FieldDistribution,
    t_values: &[f64],
    prep: PrepChoice,
    decoherence: &DecoherenceParams,
) -> Result<Vec<(f64, f64)>> {
    t_values.iter().try_for_each(|&t| check_delay(t))?;
    let state = prep.state();
    let f3 = fourier_gate(3)?;
    t_values
        .par_iter()
        .map(|&t| {
            let model = OutcomeModel::new(&state, &f3, t, decoherence)?;
            Ok((t, expected_gain_from_table(dist, &model.tabulate(dist.grid()))))
        })
        .collect()
}
