use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a digraph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node index {index} out of range for a graph of {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("dense matrix of size {0} exceeds the supported limit of {max}", max = crate::linalg::MAX_DENSE)]
    MatrixTooLarge(usize),
    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "reduced Laplacian is not stable (smallest real part {min_re:e}); \
         the network has no directed spanning tree (Assumption 3)"
    )]
    NotHurwitz { min_re: f64 },
    #[error("singular linear system")]
    Singular,
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("virtual time {s} outside [0, {t_f}]")]
    OutsideDomain { s: f64, t_f: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("estimator evaluated at t = {t} before its last event at {t_k}")]
    EstimatorBackwards { t: f64, t_k: f64 },
    #[error("event for agent {agent} at t = {t} does not follow its previous event at {prev}")]
    NonMonotonicEvent { agent: usize, t: f64, prev: f64 },
    #[error("overlapping disturbance windows on agent {0}")]
    OverlappingDisturbance(usize),
    #[error("non-finite state for agent {agent} at t = {t}")]
    NonFinite { agent: usize, t: f64 },
    #[error(
        "path-following contract violated: agent {agent} has |e_PF| = {norm} > rho = {rho} at t = {t}"
    )]
    ContractViolation {
        agent: usize,
        t: f64,
        norm: f64,
        rho: f64,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("scenario failed validation with {} error(s)", .0.len())]
    Validation(Vec<crate::scenario::Diagnostic>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::ContractViolation { .. } | Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
