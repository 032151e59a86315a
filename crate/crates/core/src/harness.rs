//! Monte Carlo ensembles of protocol runs, scaling-exponent fits and
//! oscillation-period studies of first-step gain curves.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{gaussian_prior, FieldDistribution, FieldGrid};
use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::optimizer::{gain_landscape, PrepChoice};
use crate::protocols::{OutcomeMode, ProtocolConfig, ProtocolRun};
use crate::DEFAULT_SIGMA;

/// Gaussian prior on a symmetric grid of `span_sigmas·σ` either side of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorSpec {
    pub mean: f64,
    pub sigma: f64,
    pub span_sigmas: f64,
    pub grid_points: usize,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { mean: 0.0, sigma: DEFAULT_SIGMA, span_sigmas: 6.0, grid_points: 8192 }
    }
}

impl PriorSpec {
    pub fn build(&self) -> Result<FieldDistribution> {
        if !(self.span_sigmas > 0.0) {
            return Err(Error::invalid(format!("prior span must be positive, got {}", self.span_sigmas)));
        }
        let grid = FieldGrid::centered(self.mean, self.span_sigmas * self.sigma, self.grid_points)?;
        gaussian_prior(grid, self.mean, self.sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub protocol: ProtocolConfig,
    pub n_experiments: usize,
    pub prior: PriorSpec,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    /// s
    pub t_phi: f64,
    /// Mean cumulative gain, bits.
    pub mean_gain_bits: f64,
    /// Standard error of the mean, bits.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainCurve {
    pub n_experiments: usize,
    pub points: Vec<CurvePoint>,
}

impl GainCurve {
    /// Mean gain of each individual step, bits.
    pub fn mean_increments(&self) -> Vec<f64> {
        let mut last = 0.0;
        self.points
            .iter()
            .map(|p| {
                let inc = p.mean_gain_bits - last;
                last = p.mean_gain_bits;
                inc
            })
            .collect()
    }
}

/// Runs independent trajectories in predictive mode (seed of experiment `k`
/// is `seed + k`) and averages cumulative gains step by step.
///
/// Trajectories run in parallel; the reduction walks experiments in index
/// order so the result does not depend on scheduling.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<GainCurve> {
    if config.n_experiments == 0 {
        return Err(Error::invalid("ensemble needs at least one experiment"));
    }
    config.protocol.validate()?;
    let prior = config.prior.build()?;
    let schedule = config.protocol.t_phi_schedule();

    let runs: Vec<Vec<f64>> = (0..config.n_experiments)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k as u64);
            let mut run = ProtocolRun::new(&config.protocol, &prior, seed, OutcomeMode::Predictive)
                .map_err(|e| e.in_experiment(k))?;
            let mut acc = 0.0;
            let mut cumulative = Vec::with_capacity(schedule.len());
            while let Some(step) = run.advance().map_err(|e| e.in_experiment(k))? {
                acc += step.gain.gain_bits;
                cumulative.push(acc);
            }
            Ok(cumulative)
        })
        .collect::<Result<_>>()?;

    let n = config.n_experiments as f64;
    let points = schedule
        .iter()
        .enumerate()
        .map(|(i, &t_phi)| {
            let mean = runs.iter().map(|r| r[i]).sum::<f64>() / n;
            let stderr = if config.n_experiments > 1 {
                let var = runs.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            CurvePoint { step: i + 1, t_phi, mean_gain_bits: mean, stderr }
        })
        .collect();
    Ok(GainCurve { n_experiments: config.n_experiments, points })
}

/// Local power law `δω ∝ t_φ^{−α}` read off a gain curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingEstimate {
    pub alpha: f64,
    pub window: (f64, f64),
    /// RMS residual of the fit, nats.
    pub fit_residual: f64,
    pub n_points: usize,
}

/// Least-squares slope of gain (nats) against `ln t_φ` over the points with
/// `t_lo ≤ t_φ ≤ t_hi`. The window must lie inside the curve and hold at
/// least four points.
pub fn scaling_exponent(curve: &GainCurve, window: (f64, f64)) -> Result<ScalingEstimate> {
    let (lo, hi) = window;
    let (first, last) = match (curve.points.first(), curve.points.last()) {
        (Some(a), Some(b)) => (a.t_phi, b.t_phi),
        _ => return Err(Error::invalid("empty gain curve")),
    };
    let tol = 1e-12 * last;
    if !(lo < hi && lo >= first - tol && hi <= last + tol) {
        return Err(Error::invalid(format!("window [{lo:e}, {hi:e}] is not inside the curve domain [{first:e}, {last:e}]")));
    }
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.t_phi >= lo - tol && p.t_phi <= hi + tol)
        .map(|p| (p.t_phi.ln(), p.mean_gain_bits * LN_2))
        .collect();
    if pts.len() < 4 {
        return Err(Error::invalid(format!("window holds {} points, need at least 4", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - alpha * (p.0 - mx)).powi(2)).sum();
    Ok(ScalingEstimate { alpha, window, fit_residual: (rss / n).sqrt(), n_points: pts.len() })
}

/// Windows of `width_decades` centered on each curve point, keeping those
/// that fit inside the curve with at least four points.
pub fn sliding_alpha(curve: &GainCurve, width_decades: f64) -> Vec<ScalingEstimate> {
    let half = 10f64.powf(width_decades / 2.0);
    curve
        .points
        .iter()
        .filter_map(|p| scaling_exponent(curve, (p.t_phi / half, p.t_phi * half)).ok())
        .collect()
}

/// Geometric center of a fit window.
pub fn window_center(estimate: &ScalingEstimate) -> f64 {
    (estimate.window.0 * estimate.window.1).sqrt()
}

/// Mean cumulative gain at `t_phi`, interpolated linearly in `ln t_φ`.
pub fn interpolate_gain(curve: &GainCurve, t_phi: f64) -> Result<f64> {
    let pts = &curve.points;
    let idx = pts.windows(2).position(|w| w[0].t_phi <= t_phi && t_phi <= w[1].t_phi);
    match idx {
        Some(i) => {
            let (a, b) = (pts[i], pts[i + 1]);
            let s = (t_phi.ln() - a.t_phi.ln()) / (b.t_phi.ln() - a.t_phi.ln());
            Ok(a.mean_gain_bits + s * (b.mean_gain_bits - a.mean_gain_bits))
        }
        None => Err(Error::invalid(format!("t_phi = {t_phi:e} lies outside the curve"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillationKind {
    /// Uniform prior of width Ω; variants are Ω in rad/s.
    Edge,
    /// Gaussian prior centered at ω_c; variants are ω_c in rad/s.
    Center,
    /// Coarse Gaussian-prior grid; variants are grid point counts M.
    Discreteness,
}

impl OscillationKind {
    pub fn name(self) -> &'static str {
        match self {
            OscillationKind::Edge => "edge",
            OscillationKind::Center => "center",
            OscillationKind::Discreteness => "discreteness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationSettings {
    /// Gaussian prior width (center and discreteness kinds), rad/s.
    pub sigma: f64,
    /// Grid size for the edge and center kinds.
    pub grid_points: usize,
    /// Sweep resolution relative to the characteristic period.
    pub samples_per_period: usize,
    /// Sweep length in characteristic periods (edge and discreteness kinds).
    pub periods: f64,
    /// Minimum peak prominence, bits.
    pub min_prominence: f64,
}

impl Default for OscillationSettings {
    fn default() -> Self {
        Self { sigma: DEFAULT_SIGMA, grid_points: 8192, samples_per_period: 40, periods: 40.0, min_prominence: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationResult {
    pub variant: f64,
    /// Period scale predicted by aliasing arguments, s: 2π/Ω, 2π/(3|ω_c|)
    /// or 2π/Δω.
    pub characteristic_period: f64,
    /// (t, first-step gain in bits) for balanced preparation and Fourier readout.
    pub curve: Vec<(f64, f64)>,
    /// Median spacing of the detected extrema, s; `None` when fewer than two
    /// extrema clear the prominence threshold.
    pub period: Option<f64>,
    pub extrema: Vec<f64>,
}

/// First-step gain curves for each variant of one oscillation type, with
/// the dominant period estimated from extremum spacing.
///
/// Edge and center curves are detrended (by the late-time plateau and by
/// the ω_c = 0 curve respectively) and their peaks are used. Discreteness
/// shows up as sharp gain collapses every 2π/Δω, so the dominant troughs
/// (prominence at least half of the largest) are used instead.
pub fn oscillation_study(
    kind: OscillationKind,
    variants: &[f64],
    settings: &OscillationSettings,
) -> Result<Vec<OscillationResult>> {
    if settings.samples_per_period < 4 || !(settings.periods > 0.0) {
        return Err(Error::invalid("oscillation sweep needs samples_per_period ≥ 4 and periods > 0"));
    }
    let none = DecoherenceParams::none();
    variants
        .iter()
        .map(|&v| {
            if !(v.is_finite() && v != 0.0) {
                return Err(Error::invalid(format!("oscillation variant must be finite and nonzero, got {v}")));
            }
            let (prior, period, t_max) = match kind {
                OscillationKind::Edge => {
                    let grid = FieldGrid::centered(0.0, v.abs() / 2.0, settings.grid_points)?;
                    let p = 2.0 * PI / v.abs();
                    (FieldDistribution::uniform(grid), p, settings.periods * p)
                }
                OscillationKind::Center => {
                    let grid = FieldGrid::centered(v, 6.0 * settings.sigma, settings.grid_points)?;
                    // Oscillations ride on the rise of the curve and die out
                    // within a few 1/σ.
                    (gaussian_prior(grid, v, settings.sigma)?, 2.0 * PI / (3.0 * v.abs()), 6.0 / settings.sigma)
                }
                OscillationKind::Discreteness => {
                    if v.fract() != 0.0 || v < 2.0 {
                        return Err(Error::invalid(format!("grid size must be an integer ≥ 2, got {v}")));
                    }
                    let grid = FieldGrid::centered(0.0, 6.0 * settings.sigma, v as usize)?;
                    let p = 2.0 * PI / grid.spacing();
                    // Two full revivals are needed for one spacing.
                    (gaussian_prior(grid, 0.0, settings.sigma)?, p, p * settings.periods.min(2.5))
                }
            };
            let dt = period / settings.samples_per_period as f64;
            let n = (t_max / dt).ceil() as usize;
            let ts: Vec<f64> = (1..=n).map(|k| k as f64 * dt).collect();
            let curve = gain_landscape(&prior, &ts, PrepChoice::Balanced, &none)?;
            let gains: Vec<f64> = curve.iter().map(|c| c.1).collect();

            let extrema_idx = match kind {
                OscillationKind::Edge => {
                    let tail = &gains[gains.len() / 2..];
                    let base = tail.iter().sum::<f64>() / tail.len() as f64;
                    let detrended: Vec<f64> = gains.iter().map(|g| g - base).collect();
                    find_peaks(&detrended, settings.min_prominence)
                }
                OscillationKind::Center => {
                    let grid = FieldGrid::centered(0.0, 6.0 * settings.sigma, settings.grid_points)?;
                    let reference = gain_landscape(&gaussian_prior(grid, 0.0, settings.sigma)?, &ts, PrepChoice::Balanced, &none)?;
                    let detrended: Vec<f64> = gains.iter().zip(&reference).map(|(g, r)| g - r.1).collect();
                    find_peaks(&detrended, settings.min_prominence)
                }
                OscillationKind::Discreteness => {
                    let inverted: Vec<f64> = gains.iter().map(|g| -g).collect();
                    let peaks = find_peaks(&inverted, settings.min_prominence);
                    let top = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
                    peaks.into_iter().filter(|p| p.1 >= 0.5 * top).collect()
                }
            };
            let extrema: Vec<f64> = extrema_idx.iter().map(|p| ts[p.0]).collect();
            Ok(OscillationResult { variant: v, characteristic_period: period, curve, period: median_spacing(&extrema), extrema })
        })
        .collect()
}

fn median_spacing(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) })
}

/// Interior local maxima whose topographic prominence reaches
/// `min_prominence`, as `(index, prominence)`.
pub fn find_peaks(y: &[f64], min_prominence: f64) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // Walk across flat tops; report the middle of the plateau.
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let peak = (i + j) / 2;
                let h = y[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if y[k] > h {
                        break;
                    }
                    left_min = left_min.min(y[k]);
                }
                let mut right_min = h;
                for &v in &y[j + 1..] {
                    if v > h {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                let prominence = h - left_min.max(right_min);
                if prominence >= min_prominence {
                    out.push((peak, prominence));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}
