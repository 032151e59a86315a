//! Relaxation and dephasing of a qutrit during field exposure.
//!
//! Two independent routes are provided. [`decohere_channel`] applies the
//! closed-form envelopes to the coherently evolved state. [`lindblad_oracle`]
//! integrates the master equation
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Γ₁₀ D[|0⟩⟨1|]ρ + Γ₂₁ D[|1⟩⟨2|]ρ + Γφ D[N]ρ
//! H = diag(0, ω, 2ω),  N = diag(0, 1, 2),  D[L]ρ = LρL† − ½{L†L, ρ}
//! ```
//!
//! with fixed-step RK4. The dephasing term damps ρ_pq by
//! `exp(−Γφ (p−q)² t / 2)`; combined with the decay terms this gives the
//! coherence envelopes
//! `ρ₀₁: e^{−(Γ₁₀+Γφ)t/2}`, `ρ₀₂: e^{−(Γ₂₁+4Γφ)t/2}`,
//! `ρ₁₂: e^{−(Γ₁₀+Γ₂₁+Γφ)t/2}`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qudit::{phase_evolution, QuditState, UnitaryMatrix, C64};

const DM_TOL: f64 = 1e-10;

/// 3×3 Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix3<C64>);

impl DensityMatrix {
    pub fn new(entries: Matrix3<C64>) -> Result<Self> {
        let rho = Self(entries);
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_pure(state: &QuditState) -> Result<Self> {
        if state.dim() != 3 {
            return Err(Error::QutritOnly(state.dim()));
        }
        let a = state.amplitudes();
        Ok(Self(Matrix3::from_fn(|r, c| a[r] * a[c].conj())))
    }

    /// Random mixed state: `G G† / tr` for a Gaussian-ish complex `G`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = Matrix3::from_fn(|_, _| {
            C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        });
        let m = g * g.adjoint();
        let tr = m.trace().re;
        Self(m / C64::new(tr, 0.0))
    }

    pub fn entries(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = self.hermiticity_error();
        if herm > DM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -DM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &UnitaryMatrix) -> Result<Self> {
        let m = u.to_matrix3()?;
        Ok(Self(m * self.0 * m.adjoint()))
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Downward decay rates and pure dephasing rate, all in 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecoherenceParams {
    pub gamma_10: f64,
    pub gamma_21: f64,
    pub gamma_phi: f64,
    /// Set when the rates were derived from a single coherence time.
    pub coherence_time: Option<f64>,
}

impl DecoherenceParams {
    pub fn new(gamma_10: f64, gamma_21: f64, gamma_phi: f64) -> Result<Self> {
        for (name, v) in [("gamma_10", gamma_10), ("gamma_21", gamma_21), ("gamma_phi", gamma_phi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(Self { gamma_10, gamma_21, gamma_phi, coherence_time: None })
    }

    /// Closed system: every rate zero.
    pub fn none() -> Self {
        Self { gamma_10: 0.0, gamma_21: 0.0, gamma_phi: 0.0, coherence_time: None }
    }

    /// Rates tied to one coherence time: Γ₁₀ = Γφ = 1/T_c, Γ₂₁ = √2/T_c.
    pub fn from_coherence_time(tc: f64) -> Result<Self> {
        if tc == f64::INFINITY {
            return Ok(Self::none());
        }
        if !(tc > 0.0 && tc.is_finite()) {
            return Err(Error::invalid(format!("coherence time must be positive, got {tc}")));
        }
        let gamma = 1.0 / tc;
        Ok(Self {
            gamma_10: gamma,
            gamma_21: std::f64::consts::SQRT_2 * gamma,
            gamma_phi: gamma,
            coherence_time: Some(tc),
        })
    }

    pub fn is_coherent(&self) -> bool {
        self.gamma_10 == 0.0 && self.gamma_21 == 0.0 && self.gamma_phi == 0.0
    }
}

/// Multiplicative factors the channel applies after a delay `t`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ChannelFactors {
    /// ρ₂₂ = keep22·π₂₂
    pub keep22: f64,
    /// ρ₁₁ = keep11·π₁₁ + feed11·π₂₂
    pub keep11: f64,
    pub feed11: f64,
    pub coh01: f64,
    pub coh02: f64,
    pub coh12: f64,
}

impl ChannelFactors {
    pub fn new(t: f64, p: &DecoherenceParams) -> Self {
        let (g10, g21, gphi) = (p.gamma_10, p.gamma_21, p.gamma_phi);
        let keep11 = (-g10 * t).exp();
        let keep22 = (-g21 * t).exp();
        // Cascade 2 → 1 → 0. e^{−Γ₁₀t} − e^{−Γ₂₁t} = −e^{−Γ₁₀t}·expm1(−(Γ₂₁−Γ₁₀)t)
        // keeps full precision for nearly equal rates.
        let scale = g10.max(g21);
        let diff = g21 - g10;
        let feed11 = if scale == 0.0 {
            0.0
        } else if diff.abs() < 1e-9 * scale {
            g10 * t * keep11
        } else {
            g21 * keep11 * (-(-diff * t).exp_m1()) / diff
        };
        Self {
            keep22,
            keep11,
            feed11,
            coh01: (-(g10 + gphi) * t / 2.0).exp(),
            coh02: (-(g21 + 4.0 * gphi) * t / 2.0).exp(),
            coh12: (-(g10 + g21 + gphi) * t / 2.0).exp(),
        }
    }

    /// Envelope for coherence ρ_pq (p ≠ q).
    pub fn coherence(&self, p: usize, q: usize) -> f64 {
        match (p.min(q), p.max(q)) {
            (0, 1) => self.coh01,
            (0, 2) => self.coh02,
            (1, 2) => self.coh12,
            _ => 1.0,
        }
    }
}

fn check_delay(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("delay time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// Closed-form relaxation and dephasing applied to the coherently evolved
/// state `pi` (field phases already applied) after a delay `t`.
pub fn decohere_channel(pi: &DensityMatrix, t: f64, params: &DecoherenceParams) -> Result<DensityMatrix> {
    check_delay(t)?;
    pi.validate()?;
    let f = ChannelFactors::new(t, params);
    let p = pi.entries();
    let mut rho = *p;
    let rho22 = p[(2, 2)] * f.keep22;
    let rho11 = p[(1, 1)] * f.keep11 + p[(2, 2)] * f.feed11;
    rho[(2, 2)] = rho22;
    rho[(1, 1)] = rho11;
    rho[(0, 0)] = p.trace() - rho11 - rho22;
    for r in 0..3 {
        for c in 0..3 {
            if r != c {
                rho[(r, c)] = p[(r, c)] * f.coherence(r, c);
            }
        }
    }
    Ok(DensityMatrix(rho))
}

fn dissipator(l: &Matrix3<C64>, rho: &Matrix3<C64>) -> Matrix3<C64> {
    let ldl = l.adjoint() * l;
    l * rho * l.adjoint() - (ldl * rho + rho * ldl) * C64::new(0.5, 0.0)
}

struct Lindbladian {
    hamiltonian: Matrix3<C64>,
    jumps: Vec<(f64, Matrix3<C64>)>,
}

impl Lindbladian {
    fn new(params: &DecoherenceParams, omega: f64) -> Self {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let hamiltonian = Matrix3::from_diagonal(&nalgebra::Vector3::new(zero, C64::new(omega, 0.0), C64::new(2.0 * omega, 0.0)));
        let mut lower_10 = Matrix3::zeros();
        lower_10[(0, 1)] = one;
        let mut lower_21 = Matrix3::zeros();
        lower_21[(1, 2)] = one;
        let number = Matrix3::from_diagonal(&nalgebra::Vector3::new(zero, one, C64::new(2.0, 0.0)));
        let jumps = vec![
            (params.gamma_10, lower_10),
            (params.gamma_21, lower_21),
            (params.gamma_phi, number),
        ];
        Self { hamiltonian, jumps }
    }

    fn rhs(&self, rho: &Matrix3<C64>) -> Matrix3<C64> {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
        for (rate, l) in &self.jumps {
            if *rate != 0.0 {
                out += dissipator(l, rho) * C64::new(*rate, 0.0);
            }
        }
        out
    }
}

/// RK4 integration of the master equation from `initial` over `[0, t]`,
/// returning the state after every step (length `n_steps + 1`).
pub fn lindblad_trajectory(
    initial: &DensityMatrix,
    t: f64,
    params: &DecoherenceParams,
    omega: f64,
    n_steps: usize,
) -> Result<Vec<DensityMatrix>> {
    check_delay(t)?;
    initial.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let l = Lindbladian::new(params, omega);
    let h = C64::new(t / n_steps as f64, 0.0);
    let half = C64::new(0.5, 0.0);
    let sixth = C64::new(1.0 / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    let mut rho = *initial.entries();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(DensityMatrix(rho));
    for _ in 0..n_steps {
        let k1 = l.rhs(&rho);
        let k2 = l.rhs(&(rho + k1 * h * half));
        let k3 = l.rhs(&(rho + k2 * h * half));
        let k4 = l.rhs(&(rho + k3 * h));
        rho += (k1 + k2 * two + k3 * two + k4) * h * sixth;
        out.push(DensityMatrix(rho));
    }
    Ok(out)
}

/// Final state of [`lindblad_trajectory`].
pub fn lindblad_oracle(
    initial: &DensityMatrix,
    t: f64,
    params: &DecoherenceParams,
    omega: f64,
    n_steps: usize,
) -> Result<DensityMatrix> {
    let mut traj = lindblad_trajectory(initial, t, params, omega, n_steps)?;
    Ok(traj.pop().expect("trajectory holds at least the initial state"))
}

/// Outcome probabilities of one preparation–exposure–readout cycle, built by
/// evolving the full density matrix.
///
/// Non-qutrit dimensions are accepted only for the coherent case.
pub fn outcome_probabilities(
    prep: &QuditState,
    t: f64,
    readout: &UnitaryMatrix,
    omega: f64,
    params: &DecoherenceParams,
) -> Result<Vec<f64>> {
    check_delay(t)?;
    let d = prep.dim();
    if readout.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: readout.dim() });
    }
    let evolution = phase_evolution(omega, t, d)?;
    if d != 3 {
        if !params.is_coherent() {
            return Err(Error::QutritOnly(d));
        }
        let out = prep.apply(&evolution)?.apply(readout)?;
        return Ok(out.probabilities());
    }
    let pi = DensityMatrix::from_pure(prep)?.conjugate(&evolution)?;
    let rho = decohere_channel(&pi, t, params)?;
    let fin = rho.conjugate(readout)?;
    Ok((0..3).map(|k| fin.entry(k, k).re.clamp(0.0, 1.0)).collect())
}

/// Closed-form outcome probability for a balanced preparation read out with
/// the qutrit Fourier gate, in the crate's phase convention.
pub fn dephased_fourier_prob(xi: usize, omega: f64, t: f64, params: &DecoherenceParams) -> Result<f64> {
    if xi > 2 {
        return Err(Error::invalid(format!("outcome must be 0, 1 or 2, got {xi}")));
    }
    check_delay(t)?;
    let (g10, g21, gphi) = (params.gamma_10, params.gamma_21, params.gamma_phi);
    let shift = 2.0 * PI * xi as f64 / 3.0;
    let single = (omega * t + shift).cos();
    Ok(1.0 / 3.0
        + 2.0 / 9.0 * single * (-(g10 + gphi) * t / 2.0).exp()
        + 2.0 / 9.0 * (2.0 * omega * t - shift).cos() * (-(g21 + 4.0 * gphi) * t / 2.0).exp()
        + 2.0 / 9.0 * single * (-(g10 + g21 + gphi) * t / 2.0).exp())
}
