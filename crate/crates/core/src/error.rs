use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },
    #[error("{routine} did not converge after {iterations} iterations")]
    ConvergenceFailure { routine: &'static str, iterations: usize },
    #[error("function undefined on spectrum: {0}")]
    DomainError(String),
    #[error("matrix norm {norm:.3e} exceeds exponential cap {cap:.3e}")]
    Overflow { norm: f64, cap: f64 },
    #[error("map failed the linearity spot check: residual {residual:.3e}")]
    NonLinearMap { residual: f64 },
    #[error("spectral gap {gap:.3e} too small")]
    NoGap { gap: f64 },
    #[error("{value} is not an eigenvalue: nearest at distance {distance:.3e}")]
    NotEigenvalue { value: f64, distance: f64 },

    #[error("element {index} is not a projection: residual {residual:.3e}")]
    NotProjection { index: usize, residual: f64 },
    #[error("projections {i} and {j} are not orthogonal: residual {residual:.3e}")]
    NotOrthogonal { i: usize, j: usize, residual: f64 },
    #[error("projections do not sum to the identity: residual {residual:.3e}")]
    NotComplete { residual: f64 },
    #[error("partition at time index {s} is not refined by time index {t}: residual {residual:.3e}")]
    NotRefining { s: usize, t: usize, residual: f64 },
    #[error("numeraire at time index {t} is not strictly positive: min eigenvalue {min_eig:.3e}")]
    NumeraireNotPositive { t: usize, min_eig: f64 },
    #[error("numeraire at time index {t} lies outside the information algebra: residual {residual:.3e}")]
    NumeraireOutsideAlgebra { t: usize, residual: f64 },
    #[error("matrix lies outside the declared block pattern: off-block mass {residual:.3e}")]
    NotBlockDiagonal { residual: f64 },
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("event has probability {prob:.3e}, below the update floor")]
    ZeroProbabilityEvent { prob: f64 },

    #[error("state does not commute with the partition: residual {residual:.3e}")]
    NotCompatible { residual: f64 },
    #[error("state is not faithful on projection {index}: weight {weight:.3e}")]
    NonFaithful { index: usize, weight: f64 },
    #[error("predictor lies outside the conditioning algebra: residual {residual:.3e}")]
    PredictorOutsideAlgebra { residual: f64 },

    #[error("numeraire is singular: min eigenvalue {min_eig:.3e}")]
    SingularNumeraire { min_eig: f64 },
    #[error("invalid time pair ({s}, {t})")]
    BadTimePair { s: f64, t: f64 },
    #[error("time {0} is not a filtration time")]
    UnknownTime(f64),
    #[error("process value at time index {t} lies outside the information algebra: residual {residual:.3e}")]
    ProcessOutsideAlgebra { t: usize, residual: f64 },

    #[error("no pricing state found: max violation {max_violation:.3e} after {iterations} iterations")]
    Infeasible { max_violation: f64, iterations: usize },

    #[error("shape has psi(1) = {psi1:.3e} <= 0 and cannot be calibrated")]
    NotCalibratable { psi1: f64 },
    #[error("series tail not below tolerance after {terms} terms")]
    TailNotConverged { terms: usize },
    #[error("lattice window leaks {leak:.3e} of probability mass")]
    WindowTooNarrow { leak: f64 },
    #[error("adaptive quadrature failed to converge")]
    QuadratureFailure,
    #[error("lattice step {step} too large: down intensity {gamma_down:.3e} is negative")]
    StepTooLarge { step: f64, gamma_down: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hamiltonian is not Hermitian: residual {residual:.3e}")]
    NotHermitianHamiltonian { residual: f64 },
    #[error("Markov compatibility residual {residual:.3e} exceeds gate {gate:.3e}")]
    CompatibilityGateFailed { residual: f64, gate: f64 },

    #[error("conjugate identity residual {residual:.3e} exceeds {tol:.3e}")]
    UncertifiedPair { residual: f64, tol: f64 },
    #[error("Fisher information is singular: min eigenvalue {min_eig:.3e}")]
    SingularFisherInfo { min_eig: f64 },
    #[error("pairs do not share one conditional expectation")]
    MixedExpectations,

    #[error("{0}")]
    ChecksFailed(String),

    #[error("{0}")]
    Io(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// Broad failure class; drives CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input or a violated precondition.
    Validation,
    /// A requested certificate does not hold.
    CheckFailed,
    /// The numerics broke down.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            ConvergenceFailure { .. }
            | Overflow { .. }
            | TailNotConverged { .. }
            | WindowTooNarrow { .. }
            | QuadratureFailure => ErrorClass::Numerical,
            Infeasible { .. }
            | NotCompatible { .. }
            | CompatibilityGateFailed { .. }
            | UncertifiedPair { .. }
            | SingularFisherInfo { .. }
            | NonLinearMap { .. }
            | ChecksFailed(_) => ErrorClass::CheckFailed,
            _ => ErrorClass::Validation,
        }
    }

    /// Short stable identifier, e.g. `NotHermitian`.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            DimMismatch { .. } => "DimMismatch",
            NotHermitian { .. } => "NotHermitian",
            ConvergenceFailure { .. } => "ConvergenceFailure",
            DomainError(_) => "DomainError",
            Overflow { .. } => "Overflow",
            NonLinearMap { .. } => "NonLinearMap",
            NoGap { .. } => "NoGap",
            NotEigenvalue { .. } => "NotEigenvalue",
            NotProjection { .. } => "NotProjection",
            NotOrthogonal { .. } => "NotOrthogonal",
            NotComplete { .. } => "NotComplete",
            NotRefining { .. } => "NotRefining",
            NumeraireNotPositive { .. } => "NumeraireNotPositive",
            NumeraireOutsideAlgebra { .. } => "NumeraireOutsideAlgebra",
            NotBlockDiagonal { .. } => "NotBlockDiagonal",
            InvalidGrouping(_) => "InvalidGrouping",
            InvalidModel(_) => "InvalidModel",
            InvalidState(_) => "InvalidState",
            ZeroProbabilityEvent { .. } => "ZeroProbabilityEvent",
            NotCompatible { .. } => "NotCompatible",
            NonFaithful { .. } => "NonFaithful",
            PredictorOutsideAlgebra { .. } => "PredictorOutsideAlgebra",
            SingularNumeraire { .. } => "SingularNumeraire",
            BadTimePair { .. } => "BadTimePair",
            UnknownTime(_) => "UnknownTime",
            ProcessOutsideAlgebra { .. } => "ProcessOutsideAlgebra",
            Infeasible { .. } => "Infeasible",
            NotCalibratable { .. } => "NotCalibratable",
            TailNotConverged { .. } => "TailNotConverged",
            WindowTooNarrow { .. } => "WindowTooNarrow",
            QuadratureFailure => "QuadratureFailure",
            StepTooLarge { .. } => "StepTooLarge",
            InvalidParameter(_) => "InvalidParameter",
            NotHermitianHamiltonian { .. } => "NotHermitianHamiltonian",
            CompatibilityGateFailed { .. } => "CompatibilityGateFailed",
            UncertifiedPair { .. } => "UncertifiedPair",
            SingularFisherInfo { .. } => "SingularFisherInfo",
            MixedExpectations => "MixedExpectations",
            ChecksFailed(_) => "CheckFailed",
            Io(_) => "Io",
            Parse { .. } => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
