//! End-to-end workflow: strip and DAP registration, terrain products, plot
//! metrics, plot biomass, model selection, wall-to-wall mapping and
//! figure-ready tables. Every stage reads its inputs from the artifacts of
//! earlier stages, so stages can be rerun on their own.

mod config;
mod figures;
mod manifest;
mod map;
mod plots;
mod stages;
mod synth;

pub use config::{
    AllometryConfig, HeightSetting, InputConfig, MapConfig, MetricsConfig, OutputConfig, PipelineConfig,
    RefineSetting, RegistrationConfig, RegressionConfig, TerrainConfig,
};
pub use figures::emit_figure_data;
pub use manifest::{sha256_file, verify_manifest, ArtifactRecord, Manifest, MANIFEST_FILE};
pub use map::{map_agb, map_agb_with, map_grid, MapOptions, MapOutput};
pub use plots::{read_plots, write_plots, PlotDefinition};
pub use stages::{artifact, register_strips, run_pipeline, scale_residuals, RunReport, Stage, StageReport, StripRegistration};
pub use synth::{generate_synthetic_scene, write_scene, PlantedTree, SampleKind, SceneFiles, SceneParams, SyntheticScene};

use thiserror::Error;

use crate::allometry::AllometryError;
use crate::cloud::CloudError;
use crate::metrics::MetricsError;
use crate::registration::RegistrationError;
use crate::regression::RegressionError;
use crate::terrain::TerrainError;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad configuration or input, detected before work starts.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("stage '{stage}' needs {path}; run that stage first")]
    MissingArtifact { stage: &'static str, path: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// 2 validation, 3 stage failure, 4 resource limit.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) | PipelineError::MissingArtifact { .. } => 2,
            PipelineError::ResourceLimit(_) => 4,
            PipelineError::Stage { source, .. } => match source.exit_code() {
                4 => 4,
                _ => 3,
            },
            PipelineError::Io(_) | PipelineError::Failed(_) => 3,
        }
    }
}

impl From<CloudError> for PipelineError {
    fn from(e: CloudError) -> Self {
        match e {
            CloudError::ResourceLimit { .. } => PipelineError::ResourceLimit(e.to_string()),
            CloudError::Io { .. } => PipelineError::Io(e.to_string()),
            e => PipelineError::Failed(e.to_string()),
        }
    }
}

impl From<RegistrationError> for PipelineError {
    fn from(e: RegistrationError) -> Self {
        if e.is_resource_limit() {
            PipelineError::ResourceLimit(e.to_string())
        } else {
            PipelineError::Failed(e.to_string())
        }
    }
}

impl From<TerrainError> for PipelineError {
    fn from(e: TerrainError) -> Self {
        match e {
            TerrainError::Cloud(c) => c.into(),
            e => PipelineError::Failed(e.to_string()),
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {
        $(impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Failed(e.to_string())
            }
        })*
    };
}

failed_from!(MetricsError, AllometryError, RegressionError);

fn source_date_epoch() -> Option<chrono::DateTime<chrono::Utc>> {
    let secs = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse::<i64>().ok()?;
    chrono::DateTime::from_timestamp(secs, 0)
}

/// `SOURCE_DATE_EPOCH` as RFC 3339, or the Unix epoch when unset, so that
/// reruns stamp identical provenance.
pub fn reproducible_timestamp() -> String {
    source_date_epoch()
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// `SOURCE_DATE_EPOCH` as RFC 3339, or the current time.
pub fn current_timestamp() -> String {
    source_date_epoch()
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Validation("x".into()).exit_code(), 2);
        let stage = |e| PipelineError::Stage { stage: "register", source: Box::new(e) };
        assert_eq!(stage(PipelineError::Failed("x".into())).exit_code(), 3);
        assert_eq!(stage(PipelineError::ResourceLimit("x".into())).exit_code(), 4);
        let limit = CloudError::ResourceLimit { dims: [1024; 3], limit: 10 };
        assert_eq!(PipelineError::from(RegistrationError::from(limit)).exit_code(), 4);
    }
}
