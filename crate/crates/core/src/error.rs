use crate::estimators::EstimatorKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("radiance must be non-negative, got {0}")]
    NegativeRadiance(f64),
    #[error("exposure time and gain must be positive (t={t}, g={g})")]
    InvalidExposure { t: f64, g: f64 },
    #[error("invalid camera parameters: {0}")]
    InvalidParams(&'static str),
    /// Every observation of the pixel was saturated. The caller is expected to
    /// clamp to the largest representable radiance.
    #[error("all observations are saturated")]
    Saturated,
    #[error("no observations")]
    NoObservations,
    #[error("length mismatch: {left} observations vs {right} raw values")]
    LengthMismatch { left: usize, right: usize },
    #[error("estimator {0} requires camera noise parameters")]
    MissingParams(EstimatorKind),
    #[error("need at least {needed} usable samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("frame {index} does not match the stack dimensions")]
    DimensionMismatch { index: usize },
    #[error("exposure stack is empty")]
    EmptyStack,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
