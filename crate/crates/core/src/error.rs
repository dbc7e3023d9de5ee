use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid window: [{xmin}, {xmax}] x [{ymin}, {ymax}] has no positive area")]
    InvalidWindow {
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
    },
    #[error("point {index} ({x}, {y}) lies outside the window")]
    PointOutsideWindow { index: usize, x: f64, y: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid neighbour order k = {0}; k must be at least 1")]
    InvalidK(usize),
    #[error("too few points: {n} points cannot support k = {k} (need n >= k + 1)")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid density parameters: {0}")]
    InvalidParams(String),
    #[error("all distances are zero; intensity is undefined")]
    DegenerateDistances,
    #[error("mixture collapsed to a single component after {iter} iterations")]
    DegenerateComponent { iter: usize },
    #[error("non-finite parameter update at EM iteration {iter}")]
    NonFinite { iter: usize },
    #[error("posterior {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("candidate set reaches k = {max_k} but the pattern has only {n} points")]
    KSetTooLarge { max_k: usize, n: usize },
    #[error("candidate set of neighbour orders is empty or not strictly increasing")]
    InvalidKSet,
    #[error("pattern has {n} points, fewer than the required minimum {min_points}")]
    PatternTooSmall { n: usize, min_points: usize },
    #[error("ground-truth labels are missing")]
    MissingTruth,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
