use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Eigensolver or integrator failure.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Propagation lost unitarity beyond tolerance.
    #[error("norm drift {drift:.3e} exceeds tolerance at dt = {dt} ps; use a smaller time step")]
    StepSize { drift: f64, dt: f64 },

    /// Eigenstates could not be labeled by product-basis overlap.
    #[error("degenerate labeling: max overlap {overlap:.3} below threshold for state {state}")]
    Degeneracy { state: usize, overlap: f64 },

    /// The conditional frequency shift vanishes, so the two sites cannot be
    /// resolved by a single laser.
    #[error("unresolvable sites: frequency shift is zero")]
    UnresolvableSites,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::Numeric(_)
            | Error::StepSize { .. }
            | Error::Degeneracy { .. }
            | Error::UnresolvableSites => 3,
        }
    }
}
