//! CLI failure classification; the process exit code is part of the contract.

use std::fmt;

use qts::QtsError;

/// 1 = the inputs are wrong, 2 = the numerics gave up.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid input: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<QtsError> for CliError {
    fn from(e: QtsError) -> Self {
        fn is_numerical(e: &QtsError) -> bool {
            match e {
                QtsError::LanczosNoConvergence { .. }
                | QtsError::DenseResidual { .. }
                | QtsError::QuadratureTolerance { .. }
                | QtsError::StepSizeFailure { .. } => true,
                QtsError::SweepColumn { source, .. } => is_numerical(source),
                _ => false,
            }
        }
        if is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_failures_map_to_exit_two() {
        let cases = [
            QtsError::LanczosNoConvergence {
                requested: 4,
                converged: 2,
                tol: 1e-10,
                worst_residual: 1e-3,
            },
            QtsError::DenseResidual { worst_residual: 1e-4 },
            QtsError::QuadratureTolerance { requested: 1e-8, achieved: 1e-5 },
            QtsError::StepSizeFailure { time_reached: 0.25 },
        ];
        for e in cases {
            assert_eq!(CliError::from(e).exit_code(), 2);
        }
    }

    #[test]
    fn sweep_column_wrapper_keeps_the_inner_classification() {
        let numerical = QtsError::SweepColumn {
            l: 3,
            source: Box::new(QtsError::StepSizeFailure { time_reached: 0.1 }),
        };
        assert_eq!(CliError::from(numerical).exit_code(), 2);

        let invalid = QtsError::SweepColumn {
            l: 3,
            source: Box::new(QtsError::InvalidModel("bad".into())),
        };
        assert_eq!(CliError::from(invalid).exit_code(), 1);
    }

    #[test]
    fn input_problems_map_to_exit_one() {
        let cases = [
            QtsError::InvalidModel("n must be positive".into()),
            QtsError::KinkIndexOutOfRange { l: 9, max: 8 },
            QtsError::GridTooCoarse { spacing: 0.2, max: 0.05 },
            QtsError::InvalidBath("negative width".into()),
            QtsError::TooLargeForDense { n_qubits: 30, max: 20 },
        ];
        for e in cases {
            assert_eq!(CliError::from(e).exit_code(), 1);
        }
        let io = std::io::Error::new(std::io::ErrorKind::PermissionDenied, "nope");
        assert_eq!(CliError::from(io).exit_code(), 1);
    }
}
