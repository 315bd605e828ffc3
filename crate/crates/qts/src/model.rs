//! Model builders: source-system Hamiltonians, probe-to-source couplers, and
//! the frustrated kink chain used by the tomography presets.
//!
//! The source system is a transverse-field Ising model
//!   H_S = sum_i (h_i Z_i - Delta_i X_i) + sum_{i<j} J_ij Z_i Z_j,
//! and the probe couples through H_C = sum_i (Jx_i X_i + Jy_i Y_i + Jz_i Z_i).
//! When the probe points down the source evolves under H_S + 2 H_C + eps;
//! the scalar eps is never baked into the operator — it rides along
//! analytically in the rate formulas, so one eigensolve pair covers a whole
//! bias sweep.

use crate::error::{QtsError, Result};
use crate::pauli::{PauliOp, PauliString, PauliSum};

/// Transverse-field Ising specification with symmetric two-body couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    n_qubits: usize,
    /// Longitudinal biases h_i, GHz, one per qubit.
    biases: Vec<f64>,
    /// Tunneling amplitudes Delta_i, GHz, one per qubit.
    tunneling: Vec<f64>,
    /// (i, j, J_ij) with 1-based i < j, GHz.
    couplings: Vec<(usize, usize, f64)>,
}

impl ModelSpec {
    pub fn new(
        n_qubits: usize,
        biases: Vec<f64>,
        tunneling: Vec<f64>,
        couplings: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QtsError::InvalidModel("model with zero qubits".into()));
        }
        if biases.len() != n_qubits {
            return Err(QtsError::DimensionMismatch {
                context: "bias array",
                expected: n_qubits,
                got: biases.len(),
            });
        }
        if tunneling.len() != n_qubits {
            return Err(QtsError::DimensionMismatch {
                context: "tunneling array",
                expected: n_qubits,
                got: tunneling.len(),
            });
        }
        for &v in biases.iter().chain(&tunneling) {
            if !v.is_finite() {
                return Err(QtsError::InvalidModel(format!("non-finite coefficient {v}")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, jij) in &couplings {
            if i == 0 || j == 0 || i > n_qubits || j > n_qubits {
                return Err(QtsError::InvalidModel(format!(
                    "coupling ({i},{j}) outside 1..={n_qubits}"
                )));
            }
            if i >= j {
                return Err(QtsError::InvalidModel(format!(
                    "coupling ({i},{j}) must have i < j"
                )));
            }
            if !jij.is_finite() {
                return Err(QtsError::InvalidModel(format!(
                    "non-finite coupling J({i},{j}) = {jij}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(QtsError::InvalidModel(format!("duplicate coupling ({i},{j})")));
            }
        }
        Ok(Self {
            n_qubits,
            biases,
            tunneling,
            couplings,
        })
    }

    /// Kink chain: h_1 = -J, h_N = +J, ferromagnetic nearest-neighbor
    /// couplings J_{i,i+1} = -J, uniform tunneling Delta. The competing end
    /// biases frustrate the chain and make the one-kink states degenerate at
    /// Delta = 0.
    pub fn kink_chain(n_qubits: usize, j: f64, delta: f64) -> Result<Self> {
        if n_qubits < 2 {
            return Err(QtsError::InvalidModel(format!(
                "kink chain needs at least 2 qubits, got {n_qubits}"
            )));
        }
        if !(j > 0.0) {
            return Err(QtsError::InvalidModel(format!("kink chain needs J > 0, got {j}")));
        }
        let mut biases = vec![0.0; n_qubits];
        biases[0] = -j;
        biases[n_qubits - 1] = j;
        let couplings = (1..n_qubits).map(|i| (i, i + 1, -j)).collect();
        Self::new(n_qubits, biases, vec![delta; n_qubits], couplings)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn tunneling(&self) -> &[f64] {
        &self.tunneling
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    /// H_S = sum_i (h_i Z_i - Delta_i X_i) + sum_{i<j} J_ij Z_i Z_j.
    pub fn source_hamiltonian(&self) -> Result<PauliSum> {
        let n = self.n_qubits;
        let mut terms = Vec::with_capacity(2 * n + self.couplings.len());
        for (idx, (&h, &d)) in self.biases.iter().zip(&self.tunneling).enumerate() {
            let q = idx + 1;
            if h != 0.0 {
                terms.push((h, PauliString::single(n, q, PauliOp::Z)?));
            }
            if d != 0.0 {
                terms.push((-d, PauliString::single(n, q, PauliOp::X)?));
            }
        }
        for &(i, j, jij) in &self.couplings {
            if jij != 0.0 {
                terms.push((jij, PauliString::zz(n, i, j)?));
            }
        }
        PauliSum::new(n, terms)
    }
}

/// Probe-to-source coupler plus the probe's own tunneling amplitude and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCoupling {
    /// Per source qubit: (Jx_pi, Jy_pi, Jz_pi) in GHz.
    triples: Vec<[f64; 3]>,
    /// Probe tunneling amplitude Delta_p, GHz; rates scale as Delta_p^2.
    delta_p: f64,
    /// Probe bias eps, GHz. Sweeps override this; fixed-bias runs use it.
    epsilon: f64,
}

impl ProbeCoupling {
    pub fn new(triples: Vec<[f64; 3]>, delta_p: f64) -> Result<Self> {
        if triples.is_empty() {
            return Err(QtsError::InvalidModel("coupler with zero qubits".into()));
        }
        if !(delta_p >= 0.0) || !delta_p.is_finite() {
            return Err(QtsError::InvalidModel(format!(
                "probe tunneling must be nonnegative and finite, got {delta_p}"
            )));
        }
        for t in &triples {
            for &v in t {
                if !v.is_finite() {
                    return Err(QtsError::InvalidModel(format!(
                        "non-finite coupler entry {v}"
                    )));
                }
            }
        }
        Ok(Self {
            triples,
            delta_p,
            epsilon: 0.0,
        })
    }

    /// Coupler with only Z components, given as 1-based (qubit, Jz) pairs.
    pub fn z_only(n_qubits: usize, pairs: &[(usize, f64)], delta_p: f64) -> Result<Self> {
        let mut triples = vec![[0.0; 3]; n_qubits];
        for &(q, jz) in pairs {
            if q == 0 || q > n_qubits {
                return Err(QtsError::InvalidModel(format!(
                    "coupler qubit {q} outside 1..={n_qubits}"
                )));
            }
            triples[q - 1][2] += jz;
        }
        Self::new(triples, delta_p)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[[f64; 3]] {
        &self.triples
    }

    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// H_C = sum_i (Jx_pi X_i + Jy_pi Y_i + Jz_pi Z_i).
    pub fn coupling_hamiltonian(&self) -> Result<PauliSum> {
        let n = self.n_qubits();
        let mut terms = Vec::new();
        for (idx, t) in self.triples.iter().enumerate() {
            let q = idx + 1;
            for (op, &c) in [PauliOp::X, PauliOp::Y, PauliOp::Z].iter().zip(t) {
                if c != 0.0 {
                    terms.push((c, PauliString::single(n, q, *op)?));
                }
            }
        }
        PauliSum::new(n, terms)
    }
}

/// Source Hamiltonian seen while the probe points down: H_S + 2 H_C. The bias
/// eps is deliberately absent (identity shift handled analytically).
pub fn down_hamiltonian(h_s: &PauliSum, h_c: &PauliSum) -> Result<PauliSum> {
    h_s.add(&h_c.scale(2.0)?)
}
