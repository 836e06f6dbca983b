use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("map is not completely positive (min Choi eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("channel is not invertible (|det| = {det:e})")]
    NotInvertible { det: f64 },
    #[error("overhead {p} is below the least upper bound {bound}")]
    InvalidOverhead { p: f64, bound: f64 },
    #[error("map is not extremal (trigonometric residual {residual:e})")]
    NotExtremal { residual: f64 },
    #[error("invalid rate function: {0}")]
    InvalidRates(String),
    #[error("unphysical channel parameter: {0}")]
    Unphysical(String),
    #[error("no closed form for custom channels, use the numerical pipeline")]
    UseNumericalPipeline,
    #[error("expected {lambda} bath spins, limit is 1e6")]
    TooManySpins { lambda: f64 },
    #[error("coupling undefined at zero distance")]
    Singular,
    #[error("frequency shifts have zero variance, T2* is infinite")]
    InfiniteT2,
    #[error("tau = {tau} us is not a full half period of the AC field")]
    GridViolation { tau: f64 },
    #[error("{shots} shots cannot cover {circuits} circuits")]
    TooFewShots { shots: u64, circuits: usize },
    #[error("phase does not depend on the field, sensitivity is undefined")]
    DegenerateProtocol,
}
