//! Rigid alignment of point clouds: frequency-domain translation estimation
//! (GRPC), point-to-point ICP refinement, multi-scale driving and
//! height-based evaluation.

mod evaluate;
mod fft;
mod grpc;
mod icp;
mod multiscale;
mod neighbors;
mod transform;

pub use evaluate::{evaluate_registration, RegistrationEvaluation};
pub use grpc::{grpc_translation, GrpcParams, PhaseCorrelationResult};
pub use icp::{icp_refine, IcpOutcome, IcpParams};
pub use multiscale::{register_multiscale, MultiscaleParams, RefineMode, ScaleOutcome, ScaleRegistration};
pub use neighbors::NeighborGrid;
pub use transform::{apply_transform, read_transform, write_transform, RigidTransform};

use thiserror::Error;

use crate::cloud::CloudError;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("signals differ: {0}")]
    Mismatch(String),
    #[error("no consensus: inlier fraction {inlier_fraction:.3} below required {required:.3}")]
    NoConsensus { inlier_fraction: f64, required: f64 },
    #[error("no point pairs within {max_pair_dist} m at iteration {iteration}")]
    PairingFailure {
        iteration: usize,
        max_pair_dist: f64,
        last: RigidTransform,
    },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("scale {scale} m: {source}")]
    AtScale {
        scale: f64,
        #[source]
        source: Box<RegistrationError>,
    },
}

impl RegistrationError {
    /// True when the root cause is an exceeded voxel budget.
    pub fn is_resource_limit(&self) -> bool {
        match self {
            RegistrationError::Cloud(CloudError::ResourceLimit { .. }) => true,
            RegistrationError::AtScale { source, .. } => source.is_resource_limit(),
            _ => false,
        }
    }
}
