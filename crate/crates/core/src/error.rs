use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KsError {
    #[error("collision: the position is at the origin")]
    Collision,
    #[error("antipodal pole: x points along -c, closed-form SKS momenta are unavailable")]
    Pole,
    #[error("gauge undefined: v0 = 0 and v·c = 0")]
    GaugeUndefined,
    #[error("degenerate state: {0}")]
    DegenerateState(&'static str),
    #[error("unbound orbit: oscillator frequency squared is {0} (must be positive)")]
    UnboundOrbit(f64),
    #[error("constraint violated: J·c = {0:e} exceeds tolerance")]
    ConstraintViolation(f64),
    #[error("step limit exceeded: {0} steps required")]
    StepLimitExceeded(usize),
    #[error("Kepler solver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl KsError {
    /// True for errors caused by the numerics rather than by the state itself.
    pub fn is_numerical(&self) -> bool {
        matches!(self, KsError::StepLimitExceeded(_) | KsError::NoConvergence(_))
    }
}

pub type Result<T, E = KsError> = std::result::Result<T, E>;
