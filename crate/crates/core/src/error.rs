use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The speed-of-sound polynomial dropped below its validated floor.
    #[error("speed-of-sound floor violated: h({theta}) = {value} < h_floor = {floor}")]
    FloorViolated { theta: f64, value: f64, floor: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("tridiagonal system is singular at row {row} (pivot {pivot:e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("tridiagonal system has inconsistent band lengths")]
    BandLength,

    #[error("insufficient history: need {needed} levels, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("invalid mode: eigenvalue {0} is negative")]
    InvalidMode(f64),

    /// The leading coefficient 1 - 2k(theta)p left the admissible range.
    #[error("degenerate Westervelt coefficient at step {step} (t = {t}): alpha_min = {alpha_min} at node {node}")]
    Degenerate {
        step: usize,
        t: f64,
        alpha_min: f64,
        node: usize,
    },

    #[error("flux time derivative q1 is undefined at tau = 0")]
    TauZeroFluxDerivative,

    #[error("Picard iteration failed at step {step} (t = {t}) after {iterations} iterations: difference {difference:e}, contracting = {contracting}")]
    PicardDiverged {
        step: usize,
        t: f64,
        iterations: usize,
        difference: f64,
        contracting: bool,
    },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("run with tau = {tau} failed: {source}")]
    SweepMember {
        tau: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Unwraps sweep tagging to reach the error that actually stopped a run.
    pub fn root(&self) -> &Error {
        match self {
            Error::SweepMember { source, .. } => source.root(),
            other => other,
        }
    }
}
