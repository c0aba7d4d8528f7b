use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arm geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("point ({x}, {y}, {z}) is not reachable")]
    Unreachable { x: f64, y: f64, z: f64 },
    #[error("inverse kinematics undefined: both arctangent arguments are zero")]
    DegenerateAtan,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("joint angles ({theta_s}, {theta_e}) outside limits")]
    LimitViolation { theta_s: f64, theta_e: f64 },
    #[error("actuation mode {declared} inconsistent with motion (expected {expected})")]
    ModeMismatch {
        declared: &'static str,
        expected: &'static str,
    },
    #[error("trajectory has no displacement on either joint")]
    NoMotion,
    #[error("unknown setpoint `{0}`")]
    UnknownSetpoint(String),
    #[error("IMU orientation degenerate: cannot extract joint angle")]
    GimbalDegenerate,
    #[error("input level {0} has no trials")]
    EmptyLevel(f64),
    #[error("trials at input level {0} have different lengths")]
    RaggedTrials(f64),
    #[error("need at least {needed} samples per level, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("data has zero variance; fit metric undefined")]
    DegenerateData,
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("empty simulation log")]
    EmptyLog,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
