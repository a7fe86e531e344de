use thiserror::Error;

use crate::geometry::StateSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polar chart undefined at rho=0")]
    PolarChartUndefined,
    #[error("polar state requires rho > 0, got {0}")]
    NonPositiveRho(f64),
    #[error("metric infinite: state on or outside the boundary of {0}")]
    MetricInfinite(StateSpace),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("delta = {0} outside T1 (|delta| must be < pi)")]
    OutsideT1(f64),
    #[error("steering undefined at delta = {0} (|delta| >= pi)")]
    SteeringUndefined(f64),
    #[error("barrier blow-up: (delta, gamma) = ({0}, {1}) is outside the open space {2}")]
    BarrierBlowUp(f64, f64, StateSpace),
    #[error("{0} is not a backstepping controller")]
    NotBackstepping(String),
    #[error("compositor violates condition ({condition}) at (r, s) = ({r}, {s})")]
    InvalidCompositor { condition: u8, r: f64, s: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error("trajectory left {space} at t = {t}")]
    LeftStateSpace { space: StateSpace, t: f64 },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
