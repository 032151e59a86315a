//! States and unitaries of a d-level sensor.
//!
//! Phase convention: field exposure for a time `t` acts as
//! `exp(-i diag(0, ωt, 2ωt, …))`. Every probability computed in this crate
//! uses that single convention; flipping it maps ω → −ω, which leaves all
//! gain curves for symmetric priors unchanged.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when validating constructed states and unitaries.
const VALIDATION_TOL: f64 = 1e-10;

/// Complex amplitude vector of a d-level sensor (d ≥ 2), unit norm.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct QuditState {
    amplitudes: Vec<C64>,
}

impl QuditState {
    /// Wraps `amplitudes`, rejecting d < 2 or a norm away from one.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::Dimension(amplitudes.len()));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { amplitudes })
    }

    /// Scales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        if k >= d {
            return Err(Error::invalid(format!("basis index {k} out of range for d = {d}")));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); d];
        amplitudes[k] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// Equal-amplitude superposition (1, 1, …, 1)ᵀ/√d.
    pub fn balanced(d: usize) -> Result<Self> {
        Self::phase_ramp(d, 0.0)
    }

    /// (1, e^{iα}, e^{2iα}, …)ᵀ/√d, the Fourier-protocol preparation.
    pub fn phase_ramp(d: usize, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        let amp = 1.0 / (d as f64).sqrt();
        let amplitudes = (0..d).map(|k| C64::from_polar(amp, alpha * k as f64)).collect();
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies every amplitude by e^{iθ}.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = C64::from_polar(1.0, theta);
        Self { amplitudes: self.amplitudes.iter().map(|a| a * phase).collect() }
    }

    pub fn apply(&self, u: &UnitaryMatrix) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: u.dim(), got: self.dim() });
        }
        let amplitudes = (0..u.dim())
            .map(|r| (0..u.dim()).map(|c| u.entry(r, c) * self.amplitudes[c]).sum())
            .collect();
        Ok(Self { amplitudes })
    }

    /// Computational-basis measurement probabilities |a_k|².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Square complex matrix with U·U† = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(DMatrix<C64>);

impl UnitaryMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.nrows() < 2 {
            return Err(Error::Dimension(matrix.nrows()));
        }
        let u = Self(matrix);
        let deviation = u.unitarity_error();
        if !(deviation <= VALIDATION_TOL) {
            return Err(Error::NotUnitary(deviation));
        }
        Ok(u)
    }

    pub fn identity(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        Ok(Self(DMatrix::identity(d, d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    /// Largest elementwise modulus of U·U† − 1.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let product = &self.0 * self.0.adjoint();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((product[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub(crate) fn to_matrix3(&self) -> Result<Matrix3<C64>> {
        if self.dim() != 3 {
            return Err(Error::QutritOnly(self.dim()));
        }
        Ok(Matrix3::from_fn(|r, c| self.0[(r, c)]))
    }
}

impl Serialize for UnitaryMatrix {
    /// Row-major list of rows, each entry a `[re, im]` pair.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let mut rows = serializer.serialize_seq(Some(d))?;
        for r in 0..d {
            let row: Vec<[f64; 2]> = (0..d).map(|c| [self.0[(r, c)].re, self.0[(r, c)].im]).collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

/// Control parameters of the preparation and readout pulses.
///
/// Each pulse acts as `exp(-i H)` with
/// `H = [[0, Δ₁, 0], [Δ₁, 2ε, Δ₂], [0, Δ₂, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PulseParams {
    pub eps_p: f64,
    pub delta1_p: f64,
    pub delta2_p: f64,
    pub eps_r: f64,
    pub delta1_r: f64,
    pub delta2_r: f64,
}

impl PulseParams {
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            eps_p: v[0],
            delta1_p: v[1],
            delta2_p: v[2],
            eps_r: v[3],
            delta1_r: v[4],
            delta2_r: v[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.eps_p, self.delta1_p, self.delta2_p, self.eps_r, self.delta1_r, self.delta2_r]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Prepared state `U_p |0⟩`.
    pub fn prep_state(&self) -> QuditState {
        prep_from_pulse(self.eps_p, self.delta1_p, self.delta2_p)
    }

    pub fn readout(&self) -> UnitaryMatrix {
        pulse_unitary(self.eps_r, self.delta1_r, self.delta2_r)
    }
}

/// First column of the pulse unitary, i.e. the pulse applied to |0⟩.
pub(crate) fn prep_from_pulse(eps: f64, delta1: f64, delta2: f64) -> QuditState {
    let u = pulse_unitary(eps, delta1, delta2);
    QuditState { amplitudes: (0..3).map(|r| u.entry(r, 0)).collect() }
}

/// Spin projection onto the plane perpendicular to the field.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SpinProjection {
    pub jx: f64,
    pub jy: f64,
    pub j_xy: f64,
}

/// Fourier gate F_d with entry (k, n) = e^{−2πi·nk/d}/√d.
pub fn fourier_gate(d: usize) -> Result<UnitaryMatrix> {
    if d < 2 {
        return Err(Error::Dimension(d));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let m = DMatrix::from_fn(d, d, |k, n| {
        // Reduce n·k mod d first so large d keeps the phase argument small.
        let nk = (n * k) % d;
        C64::from_polar(scale, -2.0 * PI * nk as f64 / d as f64)
    });
    Ok(UnitaryMatrix(m))
}

/// Field exposure `exp(-i diag(0, ωt, …, (d−1)ωt))`.
pub fn phase_evolution(omega: f64, t: f64, d: usize) -> Result<UnitaryMatrix> {
    if d < 2 {
        return Err(Error::Dimension(d));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("delay time must be non-negative, got {t}")));
    }
    let phase = omega * t;
    let m = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::from_polar(1.0, -(r as f64) * phase)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(UnitaryMatrix(m))
}

/// Two-tone pulse `exp(-i [[0, Δ₁, 0], [Δ₁, 2ε, Δ₂], [0, Δ₂, 0]])`.
///
/// The Hamiltonian is real symmetric, so the exponential is taken through its
/// eigendecomposition `V diag(e^{-iλ}) Vᵀ`.
pub fn pulse_unitary(eps: f64, delta1: f64, delta2: f64) -> UnitaryMatrix {
    let h = Matrix3::new(0.0, delta1, 0.0, delta1, 2.0 * eps, delta2, 0.0, delta2, 0.0);
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l)).collect();
    let m = DMatrix::from_fn(3, 3, |r, c| {
        (0..3).map(|k| phases[k] * (v[(r, k)] * v[(c, k)])).sum::<C64>()
    });
    UnitaryMatrix(m)
}

/// Qutrit state of maximal transverse spin, (e^{iα}/2)(e^{iβ}, √2, e^{−iβ})ᵀ.
pub fn xy_state(alpha: f64, beta: f64) -> QuditState {
    let global = C64::from_polar(0.5, alpha);
    QuditState {
        amplitudes: vec![
            global * C64::from_polar(1.0, beta),
            global * SQRT_2,
            global * C64::from_polar(1.0, -beta),
        ],
    }
}

/// ⟨J_X⟩, ⟨J_Y⟩ and their modulus for a spin-1 (qutrit) state.
pub fn spin_xy_projection(state: &QuditState) -> Result<SpinProjection> {
    if state.dim() != 3 {
        return Err(Error::QutritOnly(state.dim()));
    }
    let a = state.amplitudes();
    // ⟨J_+⟩ / √2 = conj(a0) a1 + conj(a1) a2; J_X = Re, J_Y = Im of √2·that.
    let raising = (a[0].conj() * a[1] + a[1].conj() * a[2]) * SQRT_2;
    let jx = raising.re;
    let jy = raising.im;
    Ok(SpinProjection { jx, jy, j_xy: jx.hypot(jy) })
}

/// Transverse spin modulus maximized over diagonal phase gauges,
/// `√2·|a₁|·(|a₀| + |a₂|)`.
///
/// Diagonal phase gates commute with the field evolution, so a preparation
/// phase can always be moved into the readout. This is the part of
/// `j_xy` that a joint preparation/readout optimization can pin down.
pub fn gauge_free_spin_xy(state: &QuditState) -> Result<f64> {
    if state.dim() != 3 {
        return Err(Error::QutritOnly(state.dim()));
    }
    let a = state.amplitudes();
    Ok(SQRT_2 * a[1].norm() * (a[0].norm() + a[2].norm()))
}

impl fmt::Display for QuditState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .amplitudes
            .iter()
            .map(|a| format!("{:.6}{:+.6}i", a.re, a.im))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}
