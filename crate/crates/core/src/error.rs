use std::path::PathBuf;

use crate::constants::ModeIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point maps through the Cayley pole{}", position.map(|p| format!(" at word position {p}")).unwrap_or_default())]
    PoleSingularity { position: Option<usize> },

    #[error("kernel evaluated on the diagonal (separation {separation:e})")]
    SingularDiagonal { separation: f64 },

    #[error("resource guard: {0}")]
    ResourceLimit(String),

    #[error("mode ({}, {}) has detected dimension {found}, expected {expected}", mode.j, mode.k)]
    RankDeficiency { mode: ModeIndex, expected: usize, found: usize },

    #[error("inverse multiplier met a nonzero coefficient on excluded mode ({}, {})", mode.j, mode.k)]
    KernelModePresent { mode: ModeIndex },

    #[error("function carries energy {energy:e} outside the pluriharmonic modes")]
    NotPluriharmonic { energy: f64 },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("function is negative somewhere (min value {min:e})")]
    NegativeFunction { min: f64 },

    #[error("denominator {value:e} is too small for a meaningful ratio")]
    DegenerateDenominator { value: f64 },

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("function is not normalized (mean {mean})")]
    NotNormalized { mean: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("no start converged (best gradient norm {gradient_norm:e})")]
    NonConvergence { gradient_norm: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
