//! Sparse Hermitian operators as weighted sums of N-qubit Pauli strings.
//!
//! Operators are stored as term lists and applied matrix-free, so products
//! with state vectors cost O(terms * 2^N) without ever materializing a dense
//! matrix. A dense path exists for small N as the oracle route in tests.
//!
//! Basis convention matches [`crate::state`]: qubit `i` is bit `i - 1`,
//! bit 1 = spin up. In that basis
//!   Z|up> = +|up>,  Z|down> = -|down>,
//!   X flips the bit,
//!   Y|up> = i|down>,  Y|down> = -i|up>.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QtsError, Result};
use crate::state::StateVector;

/// Largest qubit count accepted by the dense matrix path.
pub const DENSE_QUBIT_LIMIT: usize = 12;

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    pub fn symbol(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }

    /// Product `self * other` as (phase, resulting op).
    pub fn compose(self, other: PauliOp) -> (Complex64, PauliOp) {
        use PauliOp::*;
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (X, X) | (Y, Y) | (Z, Z) => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
        }
    }
}

/// A tensor product of Pauli factors, one per source qubit.
///
/// `factors[0]` acts on qubit 1 (bit 0).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    factors: Vec<PauliOp>,
}

impl PauliString {
    pub fn new(factors: Vec<PauliOp>) -> Result<Self> {
        if factors.is_empty() {
            return Err(QtsError::InvalidModel(
                "Pauli string must cover at least one qubit".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(vec![PauliOp::I; n_qubits])
    }

    /// String with a single non-identity factor on 1-based `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, op: PauliOp) -> Result<Self> {
        if qubit == 0 || qubit > n_qubits {
            return Err(QtsError::InvalidModel(format!(
                "qubit {qubit} out of range 1..={n_qubits}"
            )));
        }
        let mut factors = vec![PauliOp::I; n_qubits];
        factors[qubit - 1] = op;
        Self::new(factors)
    }

    /// Z_i Z_j two-body string (1-based indices, i != j).
    pub fn zz(n_qubits: usize, i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(QtsError::InvalidModel(format!("ZZ coupling with i = j = {i}")));
        }
        let mut s = Self::single(n_qubits, i, PauliOp::Z)?;
        if j == 0 || j > n_qubits {
            return Err(QtsError::InvalidModel(format!(
                "qubit {j} out of range 1..={n_qubits}"
            )));
        }
        s.factors[j - 1] = PauliOp::Z;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[PauliOp] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&f| f == PauliOp::I)
    }

    /// Factor-wise product; the phase collects the single-qubit phases.
    pub fn compose(&self, other: &Self) -> Result<(Complex64, Self)> {
        if self.n_qubits() != other.n_qubits() {
            return Err(QtsError::DimensionMismatch {
                context: "Pauli string product",
                expected: self.n_qubits(),
                got: other.n_qubits(),
            });
        }
        let mut phase = Complex64::new(1.0, 0.0);
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(&a, &b)| {
                let (p, c) = a.compose(b);
                phase *= p;
                c
            })
            .collect();
        Ok((phase, Self { factors }))
    }

    fn masks(&self) -> TermMasks {
        let mut flip = 0u64;
        let mut zy = 0u64;
        let mut y_count = 0u32;
        for (bit, &f) in self.factors.iter().enumerate() {
            match f {
                PauliOp::I => {}
                PauliOp::X => flip |= 1 << bit,
                PauliOp::Y => {
                    flip |= 1 << bit;
                    zy |= 1 << bit;
                    y_count += 1;
                }
                PauliOp::Z => zy |= 1 << bit,
            }
        }
        TermMasks { flip, zy, y_count }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &op in &self.factors {
            write!(f, "{}", op.symbol())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct TermMasks {
    /// Bits flipped by the string (X and Y factors).
    flip: u64,
    /// Bits contributing a sign from the input index (Z and Y factors).
    zy: u64,
    y_count: u32,
}

impl TermMasks {
    /// i^y_count * (-1)^popcount(zy), the index-independent part of the phase.
    fn base_phase(&self) -> Complex64 {
        let i_pow = match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if self.zy.count_ones().is_multiple_of(2) {
            i_pow
        } else {
            -i_pow
        }
    }
}

/// A Hermitian operator: real-weighted sum of Pauli strings on N qubits.
///
/// Terms are merged and kept in lexicographic factor order, so equal
/// operators have identical term lists and serialized dumps are stable.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QtsError::InvalidModel("operator on zero qubits".into()));
        }
        for (c, s) in &terms {
            if !c.is_finite() {
                return Err(QtsError::InvalidModel(format!(
                    "non-finite coefficient {c} on term {s}"
                )));
            }
            if s.n_qubits() != n_qubits {
                return Err(QtsError::DimensionMismatch {
                    context: "Pauli term length",
                    expected: n_qubits,
                    got: s.n_qubits(),
                });
            }
        }
        let mut merged = terms;
        merged.sort_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<(f64, PauliString)> = Vec::with_capacity(merged.len());
        for (c, s) in merged {
            match out.last_mut() {
                Some((c0, s0)) if *s0 == s => *c0 += c,
                _ => out.push((c, s)),
            }
        }
        out.retain(|(c, _)| *c != 0.0);
        Ok(Self {
            n_qubits,
            terms: out,
        })
    }

    pub fn empty(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of absolute coefficients, an upper bound on the spectral norm.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(QtsError::DimensionMismatch {
                context: "operator sum",
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(self.n_qubits, terms)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n_qubits,
            self.terms
                .iter()
                .map(|(c, s)| (c * factor, s.clone()))
                .collect(),
        )
    }

    /// True when every term has an even number of Y factors, i.e. the matrix
    /// is real symmetric in the computational basis. Real operators take the
    /// f64 fast path in the solvers.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, s)| {
            s.factors().iter().filter(|&&f| f == PauliOp::Y).count() % 2 == 0
        })
    }

    /// Matrix-free product `self * v`.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.n_qubits() != self.n_qubits {
            return Err(QtsError::DimensionMismatch {
                context: "operator application",
                expected: self.n_qubits,
                got: v.n_qubits(),
            });
        }
        let mut out = StateVector::zero(self.n_qubits);
        self.apply_into(v.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `dst = self * src` on raw complex slices. Lengths must equal 2^N.
    pub fn apply_into(&self, src: &[Complex64], dst: &mut [Complex64]) {
        assert_eq!(src.len(), self.dim());
        assert_eq!(dst.len(), self.dim());
        dst.fill(Complex64::new(0.0, 0.0));
        for (coeff, string) in &self.terms {
            let m = string.masks();
            let base = m.base_phase() * coeff;
            let flip = m.flip as usize;
            for (i, amp) in src.iter().enumerate() {
                let sign = if (i as u64 & m.zy).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                dst[i ^ flip] += base * sign * amp;
            }
        }
    }

    /// Real fast path of [`apply_into`](Self::apply_into); requires
    /// [`is_real`](Self::is_real).
    pub fn apply_real_into(&self, src: &[f64], dst: &mut [f64]) {
        assert!(self.is_real(), "real application of a complex operator");
        assert_eq!(src.len(), self.dim());
        assert_eq!(dst.len(), self.dim());
        dst.fill(0.0);
        for (coeff, string) in &self.terms {
            let m = string.masks();
            let base = m.base_phase().re * coeff;
            let flip = m.flip as usize;
            for (i, amp) in src.iter().enumerate() {
                let sign = if (i as u64 & m.zy).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                dst[i ^ flip] += base * sign * amp;
            }
        }
    }

    /// Dense matrix, guarded to small qubit counts; oracle path for tests
    /// and the dense eigensolver.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > DENSE_QUBIT_LIMIT {
            return Err(QtsError::TooLargeForDense {
                n_qubits: self.n_qubits,
                max: DENSE_QUBIT_LIMIT,
            });
        }
        let dim = self.dim();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (coeff, string) in &self.terms {
            let tm = string.masks();
            let base = tm.base_phase() * coeff;
            let flip = tm.flip as usize;
            for i in 0..dim {
                let sign = if (i as u64 & tm.zy).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                m[(i ^ flip, i)] += base * sign;
            }
        }
        Ok(m)
    }

    /// Diagonal (classical) energy of a computational basis state; valid for
    /// sums of I/Z strings, which is the Delta = 0 limit of the models.
    pub fn classical_energy(&self, basis_index: usize) -> f64 {
        let mut e = 0.0;
        for (coeff, string) in &self.terms {
            let m = string.masks();
            if m.flip != 0 {
                continue;
            }
            let sign = if (basis_index as u64 & m.zy).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            e += coeff * m.base_phase().re * sign;
        }
        e
    }
}

impl fmt::Display for PauliSum {
    /// Debug dump: one `coefficient string` line per term, canonical order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, s) in &self.terms {
            writeln!(f, "{c:+.16e} {s}")?;
        }
        Ok(())
    }
}
