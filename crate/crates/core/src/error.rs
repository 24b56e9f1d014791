use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Zero SNR: the channel dispersion vanishes and the normal approximation is singular.
    #[error("degenerate channel: SNR must be strictly positive (got {0})")]
    DegenerateChannel(f64),

    #[error("scenario has {0} eavesdroppers; use the multi-eavesdropper routines")]
    WrongModule(usize),

    #[error("degenerate local point: {0}")]
    DegenerateLocalPoint(String),

    #[error("no point of the resource box satisfies the surrogate feasibility constraints")]
    InfeasibleConstraints,

    #[error("thresholds admit no feasible blocklength")]
    InfeasibleThresholds,

    #[error("leakage cap {0} cannot be met anywhere in the resource box")]
    InfeasibleLeakage(f64),

    #[error("bad solver configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
