use thiserror::Error;

use crate::builder::RadialSolution;

pub type Result<T> = std::result::Result<T, RadialError>;

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("interval between {from} and {to} contains the zero {zero} of g")]
    CrossesZeroOfG { from: f64, to: f64, zero: f64 },

    #[error("radius {r} lies beyond the blow-up radius {blowup}")]
    BeyondBlowup { r: f64, blowup: f64 },

    #[error("value {xi} is outside the admissible region: {reason}")]
    OutOfRegion { xi: f64, reason: String },

    #[error("step size underflow at r = {r} (u = {u}, u' = {uprime})")]
    StepUnderflow { r: f64, u: f64, uprime: f64 },

    #[error("step budget of {max_steps} exhausted at r = {r}")]
    TooManySteps { max_steps: usize, r: f64 },

    #[error("root not bracketed on [{lo}, {hi}] (f = {flo}, {fhi})")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance (error estimate {error})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("nonlinearity `{label}` violates the bistable assumption: {detail}")]
    Nonlinearity { label: String, detail: String },

    #[error("ambiguous terminal state: {0}")]
    Ambiguous(String),

    #[error("bracket endpoint r0 = {r0} expected class {expected}, got {got}")]
    BracketMisclassified { r0: f64, expected: &'static str, got: String },

    #[error("output error: {0}")]
    Output(String),

    #[error("construction failed after {} segment(s): {source}", partial.segments.len())]
    Build {
        partial: Box<RadialSolution>,
        #[source]
        source: Box<RadialError>,
    },
}

impl RadialError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        RadialError::InvalidParameter { name, reason: reason.into() }
    }
}
