use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("odd permutation has no 3-cycle decomposition")]
    OddPermutation,

    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),

    #[error("singular matrix")]
    Singular,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{0} is not a supported prime modulus")]
    NotPrime(u64),

    #[error("factorization of p^n - 1 unavailable for p = {p}, n = {n}")]
    FactorizationUnavailable { p: u64, n: usize },

    #[error("retry limit exceeded: {0}")]
    RetryLimit(String),

    #[error("invalid braid word: {0}")]
    InvalidBraid(String),

    #[error("generator index {index} out of range for {n} strands")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid evaluation points: {0}")]
    InvalidEvalPoints(String),

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("phase 1 kernel stuck at dimension {dimension} after {alphas} alpha and {gammas} gamma witnesses")]
    KernelNotOneDimensional {
        dimension: usize,
        alphas: usize,
        gammas: usize,
    },

    #[error("inconsistent linear system: {0}")]
    InconsistentSystem(String),

    #[error("expression does not project to the required permutation")]
    ProjectionMismatch,

    #[error("all generators are trivial")]
    TrivialGenerators,

    #[error("target is not in the generated group: {0}")]
    NotInGroup(String),

    #[error("{step} exceeded its cap of {cap} elements ({missing} cycles still missing)")]
    CapExceeded {
        step: &'static str,
        cap: u64,
        missing: usize,
    },

    #[error("time budget exhausted during {0}")]
    TimeBudget(&'static str),

    #[error("expression verification failed")]
    VerificationFailed,

    #[error("invalid estimator input: {0}")]
    InvalidEstimatorInput(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
