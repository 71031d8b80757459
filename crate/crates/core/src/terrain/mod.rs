//! Ground classification, terrain and canopy rasters, height normalization.

mod chm;
mod dtm;
mod ground;
mod normalize;
mod tin;

pub use chm::{build_chm, build_chm_on, build_dsm, ChmOutput, ChmStatus};
pub use dtm::{build_dtm, build_dtm_on};
pub use ground::{filter_ground, GroundFilterOutput, GroundFilterParams};
pub use normalize::{normalize_cloud, NormalizeOutput};
pub use tin::{Facet, TriangulatedSurface};

use thiserror::Error;

use crate::cloud::CloudError;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("input cloud is empty")]
    EmptyCloud,
    #[error("only {found} ground seed(s); at least 3 are needed")]
    InsufficientSeeds { found: usize },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("no output: {0}")]
    EmptyOutput(String),
}
