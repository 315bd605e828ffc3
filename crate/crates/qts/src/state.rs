//! State vectors over the 2^N-dimensional spin-z computational basis.
//!
//! Basis convention: qubit `i` (1-based, as in the model definitions) maps to
//! bit `i - 1` of the basis index; bit value 1 is spin up (sigma-z eigenvalue
//! +1), bit value 0 is spin down (-1).

use num_complex::Complex64;

use crate::error::{QtsError, Result};

/// A normalized (or intermediate) complex amplitude vector on N qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(QtsError::DimensionMismatch {
                context: "state vector length",
                expected: dim,
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            amplitudes: vec![Complex64::new(0.0, 0.0); 1 << n_qubits],
        }
    }

    /// Computational basis state with the given index.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QtsError::DimensionMismatch {
                context: "basis index",
                expected: dim,
                got: index,
            });
        }
        let mut v = Self::zero(n_qubits);
        v.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// ⟨self|other⟩ with the conjugation on `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }

    /// Fix the global phase so the largest-magnitude amplitude is real and
    /// positive (first such index on ties). Keeps solver output and
    /// serialized eigenvectors reproducible.
    pub fn fix_phase(&mut self) {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag * (1.0 + 1e-12) {
                best_mag = m;
                best = i;
            }
        }
        let pivot = self.amplitudes[best];
        let mag = pivot.norm();
        if mag > 0.0 {
            let phase = pivot / mag;
            let rot = phase.conj();
            for a in &mut self.amplitudes {
                *a *= rot;
            }
        }
    }
}
