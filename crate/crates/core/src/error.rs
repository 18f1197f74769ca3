use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace {trace} differs from 1")]
    Trace { trace: f64 },

    #[error("negative eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },

    #[error("state vector norm {norm} differs from 1")]
    NotNormalized { norm: f64 },

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("invalid Pauli weights {0:?}")]
    PauliWeights([f64; 4]),

    #[error("invalid channel: {0}")]
    Channel(String),

    #[error("operator is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("unknown gate `{0}` (expected I, X, Y, Z or H)")]
    UnknownGate(String),

    #[error("invalid environment: {0}")]
    Environment(String),

    #[error("coherent information requires the |Phi+> probe on (I, H)")]
    NonBellProbe,

    #[error("post-selection probability {0:e} is too small to condition on")]
    ZeroProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("internal consistency fault: {0}")]
    Consistency(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Faults where the numbers themselves went wrong, as opposed to bad input.
    pub fn is_numeric_fault(&self) -> bool {
        matches!(
            self,
            Error::Consistency(_)
                | Error::NotPositive { .. }
                | Error::NotHermitian { .. }
                | Error::Trace { .. }
                | Error::RankDeficient(_)
        )
    }
}
