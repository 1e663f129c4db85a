use thiserror::Error;

use crate::flow::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scene has no morse quadric")]
    MissingMorse,

    #[error("rank-deficient constraint gradients at x (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("retraction diverged after {iterations} iterations (residual {residual:.3e})")]
    RetractionDiverged { iterations: usize, residual: f64 },

    #[error("sampling starved: {accepted} accepted out of {attempts} attempts")]
    SamplingStarved { accepted: usize, attempts: usize },

    #[error("trajectory aborted after {} vertices: {reason}", partial.polyline.len())]
    TrajectoryAborted {
        partial: Box<Trajectory>,
        reason: String,
    },

    #[error("trajectories did not meet (multiple maxima?); gap {gap:.3e}")]
    TrajectoriesDidNotMeet { gap: f64 },

    #[error("multiple maxima: {count} local maxima in the component")]
    MultipleMaxima { count: usize },

    #[error("points lie in different connected components")]
    DifferentComponents,

    #[error("no thalweg found from {seeds} seeds")]
    NoThalweg { seeds: usize },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("parameter point is not in the pivot pattern region")]
    PatternNotMember,

    #[error("degenerate constraint {index}: identically zero on the ball")]
    DegenerateConstraint { index: usize },

    #[error("no regular ε found (degenerate family?) after {draws} draws")]
    NoRegularEps { draws: usize },

    #[error("path not interior: constraint {constraint} reaches {value:.3e} along path {path}")]
    PathNotInterior {
        constraint: usize,
        path: usize,
        value: f64,
    },

    #[error("curve extent {extent:.6} exceeds sampling radius {radius:.6}")]
    CurveOutsideBall { extent: f64, radius: f64 },

    #[error("perturbed scene failed the regularity check {attempts} times")]
    PerturbationIrregular { attempts: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
