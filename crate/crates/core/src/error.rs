use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which configured limit a trajectory sample broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    JointAngle,
    JointVelocity,
    CompositeSpeed,
}

impl std::fmt::Display for LimitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LimitKind::JointAngle => "joint angle",
            LimitKind::JointVelocity => "joint velocity",
            LimitKind::CompositeSpeed => "composite hand speed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid string state: {0}")]
    InvalidState(String),

    #[error("simulation diverged at step {step} (t = {time:.5} s)")]
    Divergence { step: u64, time: f64 },

    #[error("{limit} limit violated{} at t = {time:.3} s (value {value:.4}, limit {bound:.4})",
        joint.map(|j| format!(" by joint {}", j + 1)).unwrap_or_default())]
    LimitViolation {
        limit: LimitKind,
        joint: Option<usize>,
        time: f64,
        value: f64,
        bound: f64,
    },

    #[error("value {value} outside domain [{min}, {max}]")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("grasp point projects outside the image at pixel ({x}, {y})")]
    FrameOutOfView { x: i64, y: i64 },

    #[error("grasp pixel ({x}, {y}) is not set; tip not found")]
    TipNotFound { x: i64, y: i64 },

    #[error("no simulated state within {tolerance:.4} s of observed frame at t = {time:.4} s")]
    Alignment { time: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all {0} candidates diverged in simulation")]
    EstimationFailed(usize),

    #[error("no simulated success after {0} generation attempts")]
    GenerationFailed(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
