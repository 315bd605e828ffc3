use thiserror::Error;

/// Errors produced by model construction and the numerical kernels.
#[derive(Debug, Error)]
pub enum QtsError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dense path refused for {n_qubits} qubits (limit {max})")]
    TooLargeForDense { n_qubits: usize, max: usize },

    #[error("kink index {l} out of range 1..={max}")]
    KinkIndexOutOfRange { l: usize, max: usize },

    #[error(
        "Lanczos did not converge: {converged} of {requested} pairs below tol {tol:e}; \
         worst residual {worst_residual:e}"
    )]
    LanczosNoConvergence {
        requested: usize,
        converged: usize,
        tol: f64,
        worst_residual: f64,
    },

    #[error("dense eigensolve kept residual {worst_residual:e} after inverse-iteration refinement")]
    DenseResidual { worst_residual: f64 },

    #[error("quadrature tolerance not met: requested {requested:e}, achieved {achieved:e}")]
    QuadratureTolerance { requested: f64, achieved: f64 },

    #[error("integrator step-size failure at t = {time_reached} ns")]
    StepSizeFailure { time_reached: f64 },

    #[error("sweep grid too coarse: spacing {spacing} GHz exceeds W/4 = {max} GHz")]
    GridTooCoarse { spacing: f64, max: f64 },

    #[error("invalid bath parameters: {0}")]
    InvalidBath(String),

    #[error("sweep column l = {l} failed: {source}")]
    SweepColumn {
        l: usize,
        #[source]
        source: Box<QtsError>,
    },
}

pub type Result<T> = std::result::Result<T, QtsError>;
