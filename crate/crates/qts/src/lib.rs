//! Qubit tunneling spectroscopy (QTS) and kink-basis eigenfunction
//! reconstruction.
//!
//! A probe qubit with small tunneling amplitude is strongly coupled to an
//! N-qubit source system. Sweeping the probe bias and measuring its
//! incoherent escape rate resolves the source spectrum; with engineered
//! couplers the peak heights measure squared eigenfunction amplitudes in a
//! chosen basis. The crate builds the probe-coupled Hamiltonians as sparse
//! Pauli sums, solves for low-lying eigenpairs, evaluates Marcus and full
//! line-shape transition rates for a low-frequency Gaussian bath, integrates
//! the population master equation, and drives the kink-tomography sweep for
//! a frustrated transverse Ising chain.

// validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// the negated form also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod eigen;
pub mod error;
pub mod master;
pub mod model;
pub mod pauli;
pub mod quad;
pub mod rng;
pub mod state;
pub mod tomography;

pub use bath::BathParams;
pub use eigen::{EigenSet, OverlapTable};
pub use error::QtsError;
pub use model::{ModelSpec, ProbeCoupling};
pub use pauli::{PauliOp, PauliString, PauliSum};
pub use state::StateVector;
pub use tomography::{AmplitudeMap, PeakSet, SweepSpec, TomographyGrid};
