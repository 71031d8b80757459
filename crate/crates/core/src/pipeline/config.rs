use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::metrics::{Metric, SpectralOptions, DEFAULT_COVER_THRESHOLD};
use crate::registration::{GrpcParams, MultiscaleParams, RefineMode};
use crate::terrain::GroundFilterParams;

/// Run configuration. Relative paths resolve against the directory of the
/// config file (or the working directory for a config built in code).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub registration: RegistrationConfig,
    pub terrain: TerrainConfig,
    pub metrics: MetricsConfig,
    pub allometry: AllometryConfig,
    pub regression: RegressionConfig,
    pub map: MapConfig,
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dap: Option<PathBuf>,
    /// One file per strip; the first is the reference frame.
    pub lidar: Vec<PathBuf>,
    /// Band manifest (`<band> <file>` lines).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trees: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plots: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineSetting {
    None,
    Finest,
    All,
}

impl From<RefineSetting> for RefineMode {
    fn from(r: RefineSetting) -> Self {
        match r {
            RefineSetting::None => RefineMode::None,
            RefineSetting::Finest => RefineMode::Finest,
            RefineSetting::All => RefineMode::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub scales: Vec<f64>,
    pub strip_scales: Vec<f64>,
    pub refine: RefineSetting,
    pub cutoff_fraction: f64,
    pub min_inlier_fraction: f64,
    pub inlier_threshold: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
    pub icp_max_iter: usize,
    pub icp_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icp_max_pair_dist: Option<f64>,
    pub icp_from_sparser: bool,
    pub max_voxels: usize,
    /// Radius around each recorded tree searched for its registered apex, meters.
    pub evaluation_radius: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let m = MultiscaleParams::default();
        RegistrationConfig {
            scales: m.scales.clone(),
            strip_scales: m.scales.clone(),
            refine: RefineSetting::Finest,
            cutoff_fraction: m.grpc.cutoff_fraction,
            min_inlier_fraction: m.grpc.min_inlier_fraction,
            inlier_threshold: m.grpc.inlier_threshold,
            ransac_iterations: m.grpc.ransac_iterations,
            seed: m.grpc.seed,
            icp_max_iter: m.icp_max_iter,
            icp_tol: m.icp_tol,
            icp_max_pair_dist: m.icp_max_pair_dist,
            icp_from_sparser: m.icp_from_sparser,
            max_voxels: m.max_voxels,
            evaluation_radius: 1.0,
        }
    }
}

impl RegistrationConfig {
    pub fn multiscale(&self, scales: &[f64], refine: RefineMode) -> MultiscaleParams {
        MultiscaleParams {
            scales: scales.to_vec(),
            refine,
            grpc: GrpcParams {
                cutoff_fraction: self.cutoff_fraction,
                min_inlier_fraction: self.min_inlier_fraction,
                inlier_threshold: self.inlier_threshold,
                ransac_iterations: self.ransac_iterations,
                seed: self.seed,
            },
            icp_max_iter: self.icp_max_iter,
            icp_tol: self.icp_tol,
            icp_max_pair_dist: self.icp_max_pair_dist,
            icp_from_sparser: self.icp_from_sparser,
            max_voxels: self.max_voxels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainConfig {
    pub seed_cell_size: f64,
    pub max_tin_distance: f64,
    pub max_tin_angle: f64,
    pub max_iterations: usize,
    pub dtm_cell: f64,
    pub chm_cell: f64,
    pub emit_dsm: bool,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        let g = GroundFilterParams::default();
        TerrainConfig {
            seed_cell_size: g.seed_cell_size,
            max_tin_distance: g.max_tin_distance,
            max_tin_angle: g.max_tin_angle,
            max_iterations: g.max_iterations,
            dtm_cell: 0.5,
            chm_cell: 0.1,
            emit_dsm: false,
        }
    }
}

impl TerrainConfig {
    pub fn ground_params(&self) -> GroundFilterParams {
        GroundFilterParams {
            seed_cell_size: self.seed_cell_size,
            max_tin_distance: self.max_tin_distance,
            max_tin_angle: self.max_tin_angle,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightSetting {
    /// Normalized DAP points.
    Cloud,
    Chm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub cover_threshold: f64,
    pub per_pixel: bool,
    pub corrected: bool,
    /// Height source for plot structural metrics.
    pub plot_heights: HeightSetting,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            cover_threshold: DEFAULT_COVER_THRESHOLD,
            per_pixel: false,
            corrected: false,
            plot_heights: HeightSetting::Cloud,
        }
    }
}

impl MetricsConfig {
    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            per_pixel: self.per_pixel,
            corrected: self.corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AllometryConfig {
    /// Species model table replacing entries of the built-in one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub response: String,
    pub candidates: Vec<String>,
    pub max_size: usize,
    pub loocv: bool,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            response: "agb_t_ha".into(),
            candidates: Metric::ALL.iter().map(|m| m.name().to_string()).collect(),
            max_size: 3,
            loocv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub cell_size: f64,
    /// Model file; the fitted model of this run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Structural metrics from normalized points instead of the CHM.
    pub from_cloud: bool,
    /// Smallest share of a cell's area with defined inputs.
    pub min_defined_fraction: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            cell_size: 15.0,
            model: None,
            from_cloud: false,
            min_defined_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("canopyfuse_out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        toml::from_str(s).map_err(|e| PipelineError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut c = Self::from_toml_str(&s)?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
    }

    /// `p` against the config directory unless absolute.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    /// Checks numeric ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut problems = Vec::new();
        let mut need = |label: &str, p: &Option<PathBuf>| match p {
            None => problems.push(format!("input.{label} is not set")),
            Some(p) if !self.resolve(p).is_file() => {
                problems.push(format!("input.{label}: {} does not exist", self.resolve(p).display()))
            }
            Some(_) => {}
        };
        need("dap", &self.input.dap);
        need("bands", &self.input.bands);
        need("plots", &self.input.plots);
        if self.input.trees.is_some() {
            need("trees", &self.input.trees);
        }
        if self.input.lidar.is_empty() {
            problems.push("input.lidar lists no strips".into());
        }
        for l in &self.input.lidar {
            if !self.resolve(l).is_file() {
                problems.push(format!("input.lidar: {} does not exist", self.resolve(l).display()));
            }
        }
        if let Some(m) = &self.map.model {
            if !self.resolve(m).is_file() {
                problems.push(format!("map.model: {} does not exist", self.resolve(m).display()));
            }
        }
        if let Some(o) = &self.allometry.overrides {
            if !self.resolve(o).is_file() {
                problems.push(format!("allometry.overrides: {} does not exist", self.resolve(o).display()));
            }
        }

        problems.extend(self.param_problems());
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Validation(problems.join("; ")))
        }
    }

    /// Checks numeric ranges only, for commands that name their files directly.
    pub fn validate_params(&self) -> Result<(), PipelineError> {
        let problems = self.param_problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Validation(problems.join("; ")))
        }
    }

    fn param_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let r = &self.registration;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if r.scales.is_empty() || !r.scales.iter().all(|s| positive(*s)) {
            problems.push("registration.scales must be positive".into());
        }
        if r.strip_scales.is_empty() || !r.strip_scales.iter().all(|s| positive(*s)) {
            problems.push("registration.strip_scales must be positive".into());
        }
        if !(r.cutoff_fraction > 0.0 && r.cutoff_fraction <= 1.0) {
            problems.push("registration.cutoff_fraction must be in (0, 1]".into());
        }
        if !(r.min_inlier_fraction >= 0.0 && r.min_inlier_fraction <= 1.0) {
            problems.push("registration.min_inlier_fraction must be in [0, 1]".into());
        }
        if !positive(r.inlier_threshold) || r.ransac_iterations == 0 {
            problems.push("registration RANSAC settings must be positive".into());
        }
        if !(r.icp_tol >= 0.0) || r.icp_max_pair_dist.is_some_and(|d| !positive(d)) || !positive(r.evaluation_radius) {
            problems.push("registration ICP/evaluation settings out of range".into());
        }
        if let Err(e) = self.terrain.ground_params().validate() {
            problems.push(format!("terrain: {e}"));
        }
        if !positive(self.terrain.dtm_cell) || !positive(self.terrain.chm_cell) {
            problems.push("terrain cell sizes must be positive".into());
        }
        if !(self.metrics.cover_threshold >= 0.0) {
            problems.push("metrics.cover_threshold must be non-negative".into());
        }
        if self.regression.max_size == 0 {
            problems.push("regression.max_size must be at least 1".into());
        }
        for c in &self.regression.candidates {
            if c.parse::<Metric>().is_err() {
                problems.push(format!("regression.candidates: unknown metric '{c}'"));
            }
        }
        if !positive(self.map.cell_size) {
            problems.push("map.cell_size must be positive".into());
        }
        if !(self.map.min_defined_fraction > 0.0 && self.map.min_defined_fraction <= 1.0) {
            problems.push("map.min_defined_fraction must be in (0, 1]".into());
        }
        problems
    }
}
