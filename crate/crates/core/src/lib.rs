//! Simulation engine for qutrit magnetometry.
//!
//! A qudit sensor is prepared, exposed to a static field for a delay `t`
//! and read out through a unitary gate. Each outcome updates a gridded
//! Bayesian distribution over the reduced field ω. The crate provides the
//! state algebra ([`qudit`]), relaxation and dephasing ([`decoherence`]),
//! the Bayes engine ([`bayes`]), step schedules for five estimation
//! procedures ([`protocols`]), a pulse-parameter optimizer ([`optimizer`])
//! and Monte Carlo ensembles with scaling and oscillation analyses
//! ([`harness`]).

pub mod bayes;
pub mod decoherence;
pub mod error;
pub mod harness;
pub mod likelihood;
pub mod optimizer;
pub mod protocols;
pub mod qudit;

pub use bayes::{
    bayes_update, differential_entropy, entropy, expected_gain, gaussian_prior, posterior_stats, FieldDistribution,
    FieldGrid, GainRecord,
};
pub use decoherence::{
    decohere_channel, dephased_fourier_prob, lindblad_oracle, outcome_probabilities, DecoherenceParams, DensityMatrix,
};
pub use error::{Error, Result};
pub use likelihood::{LikelihoodTable, OutcomeModel};
pub use qudit::{
    fourier_gate, phase_evolution, pulse_unitary, spin_xy_projection, xy_state, PulseParams, QuditState,
    SpinProjection, UnitaryMatrix,
};

/// Saturation time of the default prior, and the default shortest delay.
pub const T_S: f64 = 15e-9;

/// Default prior width σ = 2π/(90 ns), in rad/s.
pub const DEFAULT_SIGMA: f64 = 2.0 * std::f64::consts::PI / 90e-9;
