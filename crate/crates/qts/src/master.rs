//! Directed rates between the down- and up-manifold eigenstates and the
//! population master equation.
//!
//! Degenerate clusters (eigenvalues closer than [`CLUSTER_TOL`]) enter as
//! single aggregated states carrying cluster-summed overlaps, so nothing
//! downstream depends on the arbitrary basis inside a degenerate subspace.
//!
//! Units: energies in GHz, rates divided by Δ_p² (so one unit of reported
//! rate means Δ_p² ns⁻¹·GHz⁻² physically), and the times used by [`evolve`]
//! are correspondingly Δ_p²-scaled nanoseconds.

use crate::bath::BathParams;
use crate::eigen::{EigenSet, OverlapTable, CLUSTER_TOL};
use crate::error::{QtsError, Result};

/// Which rate evaluator backs the matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// Pure Gaussian (Marcus) rates.
    Marcus,
    /// Full line-shape quadrature with the Ohmic high-frequency factor.
    Lineshape,
}

/// Directed transition rates between cluster-aggregated down states (index
/// m) and up states (index n), plus the bias at which they were assembled.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    up_energies: Vec<f64>,
    down_energies: Vec<f64>,
    up_multiplicity: Vec<usize>,
    down_multiplicity: Vec<usize>,
    /// row-major [n_up × n_down]; entry (n, m) is the rate down-m → up-n
    forward: Vec<f64>,
    /// row-major [n_down × n_up]; entry (m, n) is the rate up-n → down-m
    backward: Vec<f64>,
    eps: f64,
}

impl RateMatrix {
    pub fn n_up(&self) -> usize {
        self.up_energies.len()
    }

    pub fn n_down(&self) -> usize {
        self.down_energies.len()
    }

    /// Master-equation dimension; states are ordered down first, then up.
    pub fn dim(&self) -> usize {
        self.n_down() + self.n_up()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn up_energies(&self) -> &[f64] {
        &self.up_energies
    }

    pub fn down_energies(&self) -> &[f64] {
        &self.down_energies
    }

    pub fn up_multiplicity(&self) -> &[usize] {
        &self.up_multiplicity
    }

    pub fn down_multiplicity(&self) -> &[usize] {
        &self.down_multiplicity
    }

    /// Case-(a) rate down-m → up-n.
    pub fn forward(&self, n: usize, m: usize) -> f64 {
        self.forward[n * self.n_down() + m]
    }

    /// Case-(b) rate up-n → down-m.
    pub fn backward(&self, m: usize, n: usize) -> f64 {
        self.backward[m * self.n_up() + n]
    }

    /// Escape rate of down state m: the column sum of all outgoing
    /// case-(a) rates. This is the Γ₀(ε) a bias sweep records when m is the
    /// down-manifold ground state.
    pub fn escape_rate(&self, m: usize) -> f64 {
        (0..self.n_up()).map(|n| self.forward(n, m)).sum()
    }

    /// Total outgoing rate of up state n (back-transfer).
    pub fn up_escape_rate(&self, n: usize) -> f64 {
        (0..self.n_down()).map(|m| self.backward(m, n)).sum()
    }

    /// Dense master-equation generator G with dP/dt = G·P; columns sum to
    /// zero by construction. Row-major, dimension [dim × dim].
    pub fn generator(&self) -> Vec<f64> {
        let nd = self.n_down();
        let nu = self.n_up();
        let d = nd + nu;
        let mut g = vec![0.0; d * d];
        for m in 0..nd {
            for n in 0..nu {
                let f = self.forward(n, m);
                let b = self.backward(m, n);
                g[(nd + n) * d + m] += f;
                g[m * d + m] -= f;
                g[m * d + (nd + n)] += b;
                g[(nd + n) * d + (nd + n)] -= b;
            }
        }
        g
    }
}

/// Assemble the directed rate matrix at probe bias `eps`.
///
/// `overlaps` must be the up-by-down table computed from the same eigen
/// sets. Case (a), down m → up n, evaluates the kernel at
/// ω + ε_p = E_n↑ − E_m↓ − eps + ε_p; case (b) at ω − ε_p.
pub fn assemble_rates(
    up: &EigenSet,
    down: &EigenSet,
    overlaps: &OverlapTable,
    eps: f64,
    bath: &BathParams,
    mode: RateMode,
) -> Result<RateMatrix> {
    if overlaps.n_rows() != up.len() || overlaps.n_cols() != down.len() {
        return Err(QtsError::DimensionMismatch {
            context: "overlap table vs eigen sets",
            expected: up.len() * down.len(),
            got: overlaps.n_rows() * overlaps.n_cols(),
        });
    }
    let up_clusters = up.clusters(CLUSTER_TOL);
    let down_clusters = down.clusters(CLUSTER_TOL);
    let agg = overlaps.cluster_summed(&up_clusters);

    let cluster_energy = |set: &EigenSet, c: &std::ops::Range<usize>| -> f64 {
        c.clone().map(|i| set.eigenvalue(i)).sum::<f64>() / c.len() as f64
    };
    let up_energies: Vec<f64> = up_clusters.iter().map(|c| cluster_energy(up, c)).collect();
    let down_energies: Vec<f64> = down_clusters
        .iter()
        .map(|c| cluster_energy(down, c))
        .collect();

    // aggregate the down direction as well: sum the table columns per
    // down-cluster (the down reference is almost always a lone ground state,
    // but keep the general case consistent)
    let nu = up_energies.len();
    let nd = down_energies.len();
    let mut delta_sq = vec![0.0; nu * nd];
    for (ci, c) in down_clusters.iter().enumerate() {
        for n in 0..nu {
            delta_sq[n * nd + ci] = c.clone().map(|m| agg.get(n, m)).sum();
        }
    }

    let mut forward = vec![0.0; nu * nd];
    let mut backward = vec![0.0; nd * nu];
    for n in 0..nu {
        for m in 0..nd {
            let omega = up_energies[n] - down_energies[m] - eps;
            let d2 = delta_sq[n * nd + m];
            let (f, b) = match mode {
                RateMode::Marcus => (bath.marcus_rate(d2, omega), bath.marcus_rate_backward(d2, omega)),
                RateMode::Lineshape => (
                    bath.lineshape_rate(d2, omega)?,
                    bath.lineshape_rate(d2, -omega)?,
                ),
            };
            forward[n * nd + m] = f;
            backward[m * nu + n] = b;
        }
    }

    Ok(RateMatrix {
        up_energies,
        down_energies,
        up_multiplicity: up_clusters.iter().map(|c| c.len()).collect(),
        down_multiplicity: down_clusters.iter().map(|c| c.len()).collect(),
        forward,
        backward,
        eps,
    })
}

/// Populations over the rate-matrix states (down block first) at one time.
#[derive(Debug, Clone)]
pub struct PopulationState {
    time: f64,
    probabilities: Vec<f64>,
}

impl PopulationState {
    pub fn new(time: f64, probabilities: Vec<f64>) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QtsError::InvalidModel(format!(
                "populations sum to {total}, expected 1"
            )));
        }
        if probabilities.iter().any(|&p| p < -1e-12) {
            return Err(QtsError::InvalidModel("negative population".into()));
        }
        Ok(Self {
            time,
            probabilities,
        })
    }

    /// All probability on down-manifold state `m` at t = 0.
    pub fn initial_down(rm: &RateMatrix, m: usize) -> Result<Self> {
        if m >= rm.n_down() {
            return Err(QtsError::InvalidModel(format!(
                "down state {m} out of range 0..{}",
                rm.n_down()
            )));
        }
        let mut p = vec![0.0; rm.dim()];
        p[m] = 1.0;
        Self::new(0.0, p)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const RTOL: f64 = 1e-9;
const ATOL: f64 = 1e-12;
const MAX_STEPS: usize = 20_000_000;

/// Integrate dP/dt = G·P through the requested (strictly increasing) output
/// times, starting from `p0`. Adaptive Dormand-Prince 5(4); the generator is
/// linear, so probability conservation is a linear invariant every
/// Runge-Kutta step preserves to round-off.
pub fn evolve(rm: &RateMatrix, p0: &PopulationState, t_grid: &[f64]) -> Result<Vec<PopulationState>> {
    let d = rm.dim();
    if p0.probabilities().len() != d {
        return Err(QtsError::DimensionMismatch {
            context: "initial populations",
            expected: d,
            got: p0.probabilities().len(),
        });
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QtsError::InvalidModel(
            "output times must be strictly increasing".into(),
        ));
    }
    if let Some(&t_first) = t_grid.first() {
        if t_first < p0.time() {
            return Err(QtsError::InvalidModel(
                "output times must not precede the initial time".into(),
            ));
        }
    }

    let g = rm.generator();
    let rhs = |y: &[f64], dy: &mut [f64]| {
        for i in 0..d {
            let row = &g[i * d..(i + 1) * d];
            dy[i] = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    };

    let rate_scale = (0..rm.n_down())
        .map(|m| rm.escape_rate(m))
        .chain((0..rm.n_up()).map(|n| rm.up_escape_rate(n)))
        .fold(0.0f64, f64::max);

    let mut t = p0.time();
    let mut y = p0.probabilities().to_vec();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut h = if rate_scale > 0.0 {
        0.01 / rate_scale
    } else {
        1.0
    };
    let mut k = vec![vec![0.0; d]; 7];
    rhs(&y, &mut k[0]);
    let mut steps = 0usize;

    for &t_out in t_grid {
        while t < t_out {
            h = h.min(t_out - t);
            // attempt one step of size h
            let mut y_stage = vec![0.0; d];
            for s in 0..6 {
                for i in 0..d {
                    let mut acc = y[i];
                    for (j, &a) in DP_A[s].iter().enumerate() {
                        acc += h * a * k[j][i];
                    }
                    y_stage[i] = acc;
                }
                let (before, after) = k.split_at_mut(s + 1);
                let _ = before;
                rhs(&y_stage, &mut after[0]);
                let _ = DP_C[s];
            }
            let mut y5 = vec![0.0; d];
            let mut err_norm_sq = 0.0;
            for i in 0..d {
                let mut acc5 = y[i];
                let mut acc4 = y[i];
                for s in 0..7 {
                    acc5 += h * DP_B5[s] * k[s][i];
                    acc4 += h * DP_B4[s] * k[s][i];
                }
                y5[i] = acc5;
                let scale = ATOL + RTOL * y[i].abs().max(acc5.abs());
                let e = (acc5 - acc4) / scale;
                err_norm_sq += e * e;
            }
            let err = (err_norm_sq / d as f64).sqrt();

            steps += 1;
            if steps > MAX_STEPS {
                return Err(QtsError::StepSizeFailure { time_reached: t });
            }

            if err <= 1.0 {
                t += h;
                y = y5;
                rhs(&y, &mut k[0]); // FSAL would reuse k[6]; recompute keeps it simple
            }
            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h *= factor;
            if !h.is_finite() || h <= f64::EPSILON * t.abs().max(1.0) * 16.0 {
                return Err(QtsError::StepSizeFailure { time_reached: t });
            }
        }
        debug_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        out.push(PopulationState {
            time: t_out,
            probabilities: y.clone(),
        });
    }
    Ok(out)
}

/// ‖G·P‖∞, the stationarity residual of a population vector.
pub fn stationary_residual(rm: &RateMatrix, p: &PopulationState) -> f64 {
    let d = rm.dim();
    let g = rm.generator();
    (0..d)
        .map(|i| {
            g[i * d..(i + 1) * d]
                .iter()
                .zip(p.probabilities())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}
