//! Outcome likelihoods tabulated over a field grid.
//!
//! For a fixed preparation, readout, delay and decoherence model, every
//! outcome probability is a trigonometric polynomial in ωt:
//!
//! ```text
//! P(ξ | ω) = Re Σ_{h=0}^{d−1} c_{ξh} e^{ihωt}
//! ```
//!
//! with `c_{ξ0} = Σ_p |R_ξp|² ρ_pp` and
//! `c_{ξh} = 2 Σ_p R_ξp R*_{ξ,p+h} ψ_p ψ*_{p+h} E_{p,p+h}` for h > 0, where
//! `E` holds the coherence envelopes. Tabulating a grid then costs one
//! complex exponential per point instead of a 3×3 density-matrix sandwich.

use crate::bayes::FieldGrid;
use crate::decoherence::{ChannelFactors, DecoherenceParams};
use crate::error::{Error, Result};
use crate::qudit::{QuditState, UnitaryMatrix, C64};

/// Harmonic coefficients of `P(ξ | ω)` for one measurement step.
#[derive(Clone, Debug)]
pub struct OutcomeModel {
    d: usize,
    t: f64,
    /// `coeffs[ξ * d + h]`
    coeffs: Vec<C64>,
}

impl OutcomeModel {
    pub fn new(prep: &QuditState, readout: &UnitaryMatrix, t: f64, params: &DecoherenceParams) -> Result<Self> {
        let d = prep.dim();
        if readout.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: readout.dim() });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("delay time must be finite and non-negative, got {t}")));
        }
        let psi = prep.amplitudes();
        let populations: Vec<f64>;
        let envelope: Box<dyn Fn(usize, usize) -> f64>;
        if params.is_coherent() {
            populations = psi.iter().map(|a| a.norm_sqr()).collect();
            envelope = Box::new(|_, _| 1.0);
        } else {
            if d != 3 {
                return Err(Error::QutritOnly(d));
            }
            let f = ChannelFactors::new(t, params);
            let pop: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
            let rho22 = pop[2] * f.keep22;
            let rho11 = pop[1] * f.keep11 + pop[2] * f.feed11;
            populations = vec![pop[0] + pop[1] + pop[2] - rho11 - rho22, rho11, rho22];
            envelope = Box::new(move |p, q| f.coherence(p, q));
        }

        let mut coeffs = vec![C64::new(0.0, 0.0); d * d];
        for xi in 0..d {
            let row = |p: usize| readout.entry(xi, p);
            coeffs[xi * d] = C64::new((0..d).map(|p| row(p).norm_sqr() * populations[p]).sum(), 0.0);
            for h in 1..d {
                let mut c = C64::new(0.0, 0.0);
                for p in 0..d - h {
                    let q = p + h;
                    c += row(p) * row(q).conj() * psi[p] * psi[q].conj() * envelope(p, q);
                }
                coeffs[xi * d + h] = c * 2.0;
            }
        }
        Ok(Self { d, t, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delay(&self) -> f64 {
        self.t
    }

    /// Writes `P(ξ | ω)` for every outcome into `out` (length `d`).
    pub fn probabilities_into(&self, omega: f64, out: &mut [f64]) {
        let d = self.d;
        let (s, c) = (omega * self.t).sin_cos();
        let z = C64::new(c, s);
        for (xi, slot) in out.iter_mut().enumerate().take(d) {
            let row = &self.coeffs[xi * d..(xi + 1) * d];
            let mut acc = row[0].re;
            let mut zh = C64::new(1.0, 0.0);
            for coeff in &row[1..] {
                zh *= z;
                acc += coeff.re * zh.re - coeff.im * zh.im;
            }
            *slot = acc.clamp(0.0, 1.0);
        }
    }

    pub fn probabilities(&self, omega: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.probabilities_into(omega, &mut out);
        out
    }

    /// Likelihood of every outcome at every grid point.
    pub fn tabulate(&self, grid: &FieldGrid) -> LikelihoodTable {
        let d = self.d;
        let mut values = vec![0.0; grid.len() * d];
        for (k, chunk) in values.chunks_exact_mut(d).enumerate() {
            self.probabilities_into(grid.point(k), chunk);
        }
        LikelihoodTable { d, m: grid.len(), values }
    }
}

/// Row-major `m × d` table of `P(ξ | ω_k)`.
#[derive(Clone, Debug)]
pub struct LikelihoodTable {
    d: usize,
    m: usize,
    values: Vec<f64>,
}

impl LikelihoodTable {
    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, xi: usize) -> f64 {
        self.values[k * self.d + xi]
    }

    /// Likelihood column for one outcome.
    pub fn column(&self, xi: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.get(k, xi)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::outcome_probabilities;
    use crate::qudit::{fourier_gate, prep_from_pulse, pulse_unitary, xy_state};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    proptest! {
        #[test]
        fn harmonic_form_matches_density_matrix_route(
            e in -PI..PI, d1 in -PI..PI, d2 in -PI..PI,
            er in -PI..PI, r1 in -PI..PI, r2 in -PI..PI,
            omega in -2e8f64..2e8, t in 0.0f64..2e-5, tc_us in 1.0f64..50.0, coherent in any::<bool>()
        ) {
            let prep = prep_from_pulse(e, d1, d2);
            let readout = pulse_unitary(er, r1, r2);
            let params = if coherent {
                DecoherenceParams::none()
            } else {
                DecoherenceParams::from_coherence_time(tc_us * 1e-6).unwrap()
            };
            let model = OutcomeModel::new(&prep, &readout, t, &params).unwrap();
            let fast = model.probabilities(omega);
            let slow = outcome_probabilities(&prep, t, &readout, omega, &params).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-11, "{fast:?} vs {slow:?}");
            }
        }
    }

    #[test]
    fn generic_dimension_coherent() {
        for d in [2usize, 4, 5] {
            let prep = QuditState::balanced(d).unwrap();
            let f = fourier_gate(d).unwrap();
            let model = OutcomeModel::new(&prep, &f, 3e-8, &DecoherenceParams::none()).unwrap();
            for omega in [-4e7, 1e6, 9e7] {
                let fast = model.probabilities(omega);
                let slow = outcome_probabilities(&prep, 3e-8, &f, omega, &DecoherenceParams::none()).unwrap();
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_delay_is_field_independent() {
        let model = OutcomeModel::new(&xy_state(0.0, 0.0), &fourier_gate(3).unwrap(), 0.0, &DecoherenceParams::none()).unwrap();
        let a = model.probabilities(1e8);
        let b = model.probabilities(-3e7);
        assert_eq!(a, b);
    }
}
