//! Force-estimation precision limits for a classically driven, thermally
//! damped quantum harmonic oscillator.
//!
//! The oscillator is described entirely at the level of Gaussian moments
//! (first moments and covariance matrix, quadratures ordered
//! `X1, P1, X2, P2, ...`, vacuum variance 1/2). On top of that state
//! representation the crate provides:
//!
//! * [`gaussian`]: symplectic operations, the thermal loss channel, the
//!   forced evolution and its three-mode purification;
//! * [`fisher`]: momentum-measurement Fisher information, extended-system
//!   quantum Fisher information and its gauge minimisation, and the
//!   resulting force-uncertainty bounds;
//! * [`protocol`]: the sequential probe/measure/reset strategy, its optimal
//!   probing time and the comparison with the potential sensitivity;
//! * [`montecarlo`]: reproducible sampling, maximum-likelihood estimation
//!   and the numerical oracles used to cross-check every closed form;
//! * [`validation`]: the identity suite behind `forcebound validate`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fisher;
pub mod gaussian;
pub mod montecarlo;
pub mod optimize;
pub mod protocol;
pub mod validation;

pub use error::{Error, Result};
pub use fisher::{attenuation_d, Bound, BoundInputs, GaugeParams};
pub use gaussian::{ChannelDescriptor, GaussianState, OscillatorParams};
pub use montecarlo::{EstimationReport, RngStream};
pub use protocol::{ProtocolConfig, SensitivityReport};

/// Reduced Planck constant (CODATA 2018), J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (exact SI), J/K.
pub const K_B: f64 = 1.380_649e-23;
