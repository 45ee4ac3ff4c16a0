//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max relative asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },

    #[error("operator {name} is not positive definite")]
    NotPositiveDefinite { name: String },

    #[error("operator composition mismatch: source space {left} does not chain with target space {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("refinement level {requested} exceeds the level cap {cap}")]
    LevelCap { requested: u32, cap: u32 },

    #[error("complex has no interior vertices; the Dirichlet construction is degenerate")]
    DegenerateComplex,

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature panel [{lo}, {hi}] contains an unsplit kernel kink at {at}")]
    UnsplitKink { lo: f64, hi: f64, at: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
