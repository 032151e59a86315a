//! Discretized field distributions, Bayesian updates and information
//! functionals.
//!
//! Entropies are discrete (−Σ p ln p, in nats). The differential correction
//! `ln Δω` cancels in every gain and is added only by
//! [`differential_entropy`]. Gains are reported in bits.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodTable, OutcomeModel};
use crate::qudit::{QuditState, UnitaryMatrix};

/// Evenly spaced field values on `[omega_min, omega_max)`.
///
/// Point `k` sits at the cell midpoint `omega_min + (k + ½)·Δω` with
/// `Δω = (omega_max − omega_min)/m`, so a grid symmetric about zero is
/// symmetric under index reversal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldGrid {
    omega_min: f64,
    omega_max: f64,
    m: usize,
}

impl FieldGrid {
    pub fn new(omega_min: f64, omega_max: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {m}")));
        }
        if !(omega_min.is_finite() && omega_max.is_finite() && omega_max > omega_min) {
            return Err(Error::invalid(format!("grid bounds must satisfy min < max, got [{omega_min}, {omega_max}]")));
        }
        Ok(Self { omega_min, omega_max, m })
    }

    /// `[center − half_width, center + half_width)` with `m` points.
    pub fn centered(center: f64, half_width: f64, m: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, m)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / self.m as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        self.omega_min + (k as f64 + 0.5) * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|k| self.point(k))
    }

    /// Index of the grid point closest to `omega`.
    pub fn nearest(&self, omega: f64) -> usize {
        let k = ((omega - self.omega_min) / self.spacing() - 0.5).round();
        k.clamp(0.0, (self.m - 1) as f64) as usize
    }
}

/// Normalized, non-negative weights over a [`FieldGrid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDistribution {
    grid: FieldGrid,
    weights: Vec<f64>,
}

impl FieldDistribution {
    /// Normalizes `weights`; rejects negative, non-finite or all-zero input.
    pub fn from_weights(grid: FieldGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights sum to zero"));
        }
        Ok(Self { grid, weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn uniform(grid: FieldGrid) -> Self {
        let w = 1.0 / grid.len() as f64;
        Self { grid, weights: vec![w; grid.len()] }
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gaussian weights `∝ exp(−(ω − mean)²/2σ²)` on `grid`.
pub fn gaussian_prior(grid: FieldGrid, mean: f64, sigma: f64) -> Result<FieldDistribution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let weights = grid
        .points()
        .map(|w| {
            let z = (w - mean) / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    FieldDistribution::from_weights(grid, weights)
}

/// Bayes rule: `w'_k ∝ w_k·L_k`. Fails when every product vanishes.
pub fn bayes_update(dist: &FieldDistribution, likelihood: &[f64]) -> Result<FieldDistribution> {
    if likelihood.len() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), got: likelihood.len() });
    }
    if likelihood.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("likelihood values must be finite and non-negative"));
    }
    let mut weights: Vec<f64> = dist.weights.iter().zip(likelihood).map(|(w, l)| w * l).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPosterior { outcome: usize::MAX });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(FieldDistribution { grid: dist.grid, weights })
}

/// Posterior after observing `outcome`, using a tabulated likelihood.
pub fn update_with_outcome(dist: &FieldDistribution, table: &LikelihoodTable, outcome: usize) -> Result<FieldDistribution> {
    if table.points() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), got: table.points() });
    }
    if outcome >= table.outcomes() {
        return Err(Error::invalid(format!("outcome {outcome} out of range for d = {}", table.outcomes())));
    }
    let mut weights: Vec<f64> = dist.weights.iter().enumerate().map(|(k, w)| w * table.get(k, outcome)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPosterior { outcome });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(FieldDistribution { grid: dist.grid, weights })
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Discrete Shannon entropy `−Σ p ln p` in nats.
pub fn entropy(dist: &FieldDistribution) -> f64 {
    -dist.weights.iter().map(|&p| xlnx(p)).sum::<f64>()
}

/// Entropy of the density the weights approximate: discrete entropy plus `ln Δω`.
pub fn differential_entropy(dist: &FieldDistribution) -> f64 {
    entropy(dist) + dist.grid.spacing().ln()
}

/// Analytic differential entropy of a Gaussian, ½ ln(2πeσ²).
pub fn gaussian_entropy(sigma: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * sigma * sigma).ln()
}

/// Marginal outcome distribution `Σ_k w_k P(ξ | ω_k)`.
pub fn marginal_outcomes(dist: &FieldDistribution, table: &LikelihoodTable) -> Vec<f64> {
    let d = table.outcomes();
    let mut out = vec![0.0; d];
    for (k, w) in dist.weights.iter().enumerate() {
        for (xi, slot) in out.iter_mut().enumerate() {
            *slot += w * table.get(k, xi);
        }
    }
    out
}

/// Expected information gain of a prospective step, in bits, for a
/// precomputed likelihood table.
///
/// Uses `⟨S'⟩ = Σ_ξ (Z_ξ ln Z_ξ − Σ_k q_kξ ln q_kξ)` with `q_kξ = w_k P(ξ|ω_k)`
/// and `Z_ξ = Σ_k q_kξ`, summed in fixed grid order.
pub fn expected_gain_from_table(dist: &FieldDistribution, table: &LikelihoodTable) -> f64 {
    let d = table.outcomes();
    let mut z = vec![0.0; d];
    let mut qlnq = vec![0.0; d];
    for (k, &w) in dist.weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        for xi in 0..d {
            let q = w * table.get(k, xi);
            z[xi] += q;
            qlnq[xi] += xlnx(q);
        }
    }
    let expected_posterior: f64 = (0..d).map(|xi| xlnx(z[xi]) - qlnq[xi]).sum();
    (entropy(dist) - expected_posterior) / LN_2
}

/// Expected information gain (bits) of a step with delay `t`, preparation
/// `prep` and readout `readout`, averaged over outcomes under `dist`.
pub fn expected_gain(
    dist: &FieldDistribution,
    t: f64,
    prep: &QuditState,
    readout: &UnitaryMatrix,
    params: &DecoherenceParams,
) -> Result<f64> {
    let model = OutcomeModel::new(prep, readout, t, params)?;
    Ok(expected_gain_from_table(dist, &model.tabulate(dist.grid())))
}

/// Grid-weighted mean and standard deviation.
pub fn posterior_stats(dist: &FieldDistribution) -> (f64, f64) {
    let grid = dist.grid;
    let mean: f64 = dist.weights.iter().enumerate().map(|(k, w)| w * grid.point(k)).sum();
    let var: f64 = dist
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let dev = grid.point(k) - mean;
            w * dev * dev
        })
        .sum();
    (mean, var.max(0.0).sqrt())
}

/// Entropy bookkeeping for one executed step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GainRecord {
    pub step_index: usize,
    /// nats
    pub entropy_before: f64,
    /// nats
    pub entropy_after: f64,
    pub gain_bits: f64,
}

impl GainRecord {
    pub fn new(step_index: usize, entropy_before: f64, entropy_after: f64) -> Self {
        Self { step_index, entropy_before, entropy_after, gain_bits: (entropy_before - entropy_after) / LN_2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{fourier_gate, xy_state};
    use proptest::prelude::*;

    const SIGMA: f64 = 2.0 * PI / 90e-9;

    fn test_prior(m: usize) -> FieldDistribution {
        gaussian_prior(FieldGrid::centered(0.0, 6.0 * SIGMA, m).unwrap(), 0.0, SIGMA).unwrap()
    }

    #[test]
    fn grid_validation_and_layout() {
        assert!(FieldGrid::new(0.0, 1.0, 1).is_err());
        assert!(FieldGrid::new(1.0, 1.0, 4).is_err());
        let g = FieldGrid::new(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.spacing(), 0.5);
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.nearest(0.3), 2);
        assert_eq!(g.nearest(-5.0), 0);
    }

    #[test]
    fn gaussian_prior_is_symmetric_and_centered() {
        let prior = test_prior(1001);
        let w = prior.weights();
        for k in 0..w.len() {
            assert!((w[k] - w[w.len() - 1 - k]).abs() < 1e-12);
        }
        let (mean, std) = posterior_stats(&prior);
        let dw = prior.grid().spacing();
        assert!(mean.abs() < dw);
        assert!((std - SIGMA).abs() < dw);
        assert!(gaussian_prior(*prior.grid(), 0.0, 0.0).is_err());
        assert!(gaussian_prior(*prior.grid(), 0.0, -1.0).is_err());
    }

    #[test]
    fn differential_entropy_of_fine_gaussian() {
        let prior = test_prior(100_000);
        assert!((differential_entropy(&prior) - gaussian_entropy(SIGMA)).abs() < 1e-3);
        let prior = test_prior(8192);
        let expected = gaussian_entropy(SIGMA) - prior.grid().spacing().ln();
        assert!((entropy(&prior) - expected).abs() < 1e-3);
    }

    #[test]
    fn entropy_reference_values() {
        let g = FieldGrid::new(0.0, 1.0, 64).unwrap();
        assert!((entropy(&FieldDistribution::uniform(g)) - 64f64.ln()).abs() < 1e-12);
        let mut w = vec![0.0; 64];
        w[17] = 1.0;
        assert_eq!(entropy(&FieldDistribution::from_weights(g, w).unwrap()), 0.0);
    }

    #[test]
    fn update_edge_cases() {
        let prior = test_prior(512);
        let same = bayes_update(&prior, &vec![0.4; 512]).unwrap();
        for (a, b) in same.weights().iter().zip(prior.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut indicator = vec![0.0; 512];
        indicator[300] = 1.0;
        let delta = bayes_update(&prior, &indicator).unwrap();
        assert_eq!(delta.weights()[300], 1.0);
        assert_eq!(posterior_stats(&delta), (prior.grid().point(300), 0.0));
        assert!(matches!(bayes_update(&prior, &vec![0.0; 512]), Err(Error::ZeroPosterior { .. })));
        assert!(bayes_update(&prior, &[1.0; 3]).is_err());
    }

    #[test]
    fn conjugate_gaussian_product() {
        let prior = test_prior(20_000);
        let s2 = 0.7 * SIGMA;
        let like: Vec<f64> = prior.grid().points().map(|w| (-0.5 * (w / s2).powi(2)).exp()).collect();
        let post = bayes_update(&prior, &like).unwrap();
        let expected = (SIGMA.powi(-2) + s2.powi(-2)).powf(-0.5);
        let (mean, std) = posterior_stats(&post);
        assert!(mean.abs() < prior.grid().spacing());
        assert!((std - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn bimodal_stats() {
        let g = FieldGrid::new(-2.0, 2.0, 4).unwrap();
        let d = FieldDistribution::from_weights(g, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (mean, std) = posterior_stats(&d);
        assert!(mean.abs() < 1e-15);
        assert!((std - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_delay_gain_vanishes() {
        let prior = test_prior(8192);
        let f = fourier_gate(3).unwrap();
        for prep in [QuditState::balanced(3).unwrap(), xy_state(0.0, 0.0)] {
            let g = expected_gain(&prior, 0.0, &prep, &f, &DecoherenceParams::none()).unwrap();
            assert!(g.abs() < 1e-9, "{g}");
        }
    }

    #[test]
    fn plateau_levels_match_closed_forms() {
        let prior = test_prior(8192);
        let f = fourier_gate(3).unwrap();
        let none = DecoherenceParams::none();
        let t = 75e-9;
        let balanced = expected_gain(&prior, t, &QuditState::balanced(3).unwrap(), &f, &none).unwrap();
        let xy = expected_gain(&prior, t, &xy_state(0.0, 0.0), &f, &none).unwrap();
        assert!((balanced - (5.0 / 3.0 - 3f64.ln()) / LN_2).abs() < 5e-3, "{balanced}");
        assert!((xy - 2.0 * (1.0 / LN_2 - 1.0)).abs() < 5e-3, "{xy}");
    }

    #[test]
    fn gain_matches_brute_force_bayes() {
        // Independent route: update with each outcome, take entropies, weight by marginals.
        let prior = test_prior(2048);
        let prep = xy_state(0.3, -1.1);
        let f = fourier_gate(3).unwrap();
        let params = DecoherenceParams::from_coherence_time(2e-7).unwrap();
        let t = 40e-9;
        let fast = expected_gain(&prior, t, &prep, &f, &params).unwrap();
        let mut expected_entropy = 0.0;
        for xi in 0..3 {
            let like: Vec<f64> = prior
                .grid()
                .points()
                .map(|w| crate::decoherence::outcome_probabilities(&prep, t, &f, w, &params).unwrap()[xi])
                .collect();
            let p_xi: f64 = prior.weights().iter().zip(&like).map(|(a, b)| a * b).sum();
            expected_entropy += p_xi * entropy(&bayes_update(&prior, &like).unwrap());
        }
        let slow = (entropy(&prior) - expected_entropy) / LN_2;
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn grid_refinement_is_stable() {
        let f = fourier_gate(3).unwrap();
        let none = DecoherenceParams::none();
        let (coarse, fine) = (test_prior(8192), test_prior(16384));
        for t in [5e-9, 15e-9, 40e-9, 75e-9] {
            for prep in [QuditState::balanced(3).unwrap(), xy_state(0.0, 0.0)] {
                let a = expected_gain(&coarse, t, &prep, &f, &none).unwrap();
                let b = expected_gain(&fine, t, &prep, &f, &none).unwrap();
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gain_record_units() {
        let r = GainRecord::new(1, 2.0, 2.0 - LN_2);
        assert!((r.gain_bits - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn update_keeps_normalization(seed in any::<u64>(), t in 0.0f64..3e-7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let prior = test_prior(1024);
            let prep = crate::qudit::prep_from_pulse(rng.random(), rng.random(), rng.random());
            let model = OutcomeModel::new(&prep, &fourier_gate(3).unwrap(), t, &DecoherenceParams::none()).unwrap();
            let table = model.tabulate(prior.grid());
            let xi = rng.random_range(0..3);
            if let Ok(post) = update_with_outcome(&prior, &table, xi) {
                prop_assert!((post.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(post.weights().iter().all(|w| *w >= 0.0));
            }
            prop_assert!(expected_gain_from_table(&prior, &table) >= -1e-9);
        }
    }
}
