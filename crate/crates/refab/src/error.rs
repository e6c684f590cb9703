//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Velocity model evaluated outside its declared validity interval.
    #[error("argument {value} outside validity interval [{lo}, {hi}] of the velocity model")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    /// Speed is zero or negative where it must be positive.
    #[error("velocity degenerate: lambda({at}) = {lambda} is not positive")]
    DegenerateSpeed { at: f64, lambda: f64 },

    /// Structural problem with a velocity model definition.
    #[error("invalid velocity model: {0}")]
    BadVelocityModel(String),

    /// A parameter fails a structural precondition (documented per operation).
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    /// Configuration file could not be parsed or fails validation.
    #[error("config error: {0}")]
    Config(String),

    /// A referenced input file is malformed.
    #[error("malformed input {path}: {reason}")]
    BadInputFile { path: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Solution norm exceeded the blow-up guard.
    #[error("solution blow-up at t = {t}: norm {norm:.3e} exceeds 1e12")]
    BlowUp { t: f64, norm: f64 },

    /// The coupled mass/displacement fixed point failed to settle.
    #[error("characteristic step at t = {t} did not converge after {halvings} step halvings")]
    FixedPointDiverged { t: f64, halvings: u32 },

    /// Winding-number integration never settled near an integer.
    #[error(
        "contour integral over [{re_min}, {re_max}] x [{im_min}, {im_max}] gave winding {value} \
         (not within 1e-3 of an integer at max refinement)"
    )]
    WindingNotInteger {
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        value: f64,
    },

    /// A characteristic root sits (numerically) on the counting contour.
    #[error("characteristic function vanishes on the counting contour (min |f| = {min_abs:.3e})")]
    RootOnContour { min_abs: f64 },

    /// Sign condition for a bracketed root search failed.
    #[error("bracketing failed on interval {n} = ({lo:.6}, {hi:.6})")]
    BracketingFailed { n: usize, lo: f64, hi: f64 },

    /// An operation was invoked outside its parameter case.
    #[error("case error: {0}")]
    WrongCase(String),

    /// Trajectory lacks data an analysis needs (snapshots, coverage, ...).
    #[error("trajectory unsuitable: {0}")]
    BadTrajectory(String),

    /// Test function violates its boundary/terminal constraints.
    #[error("test function constraint violated: {0}")]
    BadTestFunction(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OutOfRange { .. }
            | Error::DegenerateSpeed { .. }
            | Error::BadVelocityModel(_)
            | Error::BadParameter(_)
            | Error::Config(_)
            | Error::BadInputFile { .. }
            | Error::Io { .. }
            | Error::WrongCase(_)
            | Error::BadTrajectory(_)
            | Error::BadTestFunction(_) => 2,
            Error::BlowUp { .. }
            | Error::FixedPointDiverged { .. }
            | Error::WindingNotInteger { .. }
            | Error::RootOnContour { .. }
            | Error::BracketingFailed { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
