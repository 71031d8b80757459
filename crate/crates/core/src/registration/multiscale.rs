use rayon::prelude::*;

use super::{grpc_translation, icp_refine, GrpcParams, IcpOutcome, IcpParams, PhaseCorrelationResult, RegistrationError, RigidTransform};
use crate::cloud::{voxelize, PointCloud, DEFAULT_MAX_VOXELS};

/// Which scales get an ICP pass after the phase-correlation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineMode {
    #[default]
    None,
    /// Only the smallest voxel size.
    Finest,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleParams {
    /// Voxel sizes in meters.
    pub scales: Vec<f64>,
    pub refine: RefineMode,
    pub grpc: GrpcParams,
    pub icp_max_iter: usize,
    pub icp_tol: f64,
    /// ICP pairing radius; `None` means twice the finest scale.
    pub icp_max_pair_dist: Option<f64>,
    /// Pair from the cloud with fewer points and invert the result. Pairing
    /// sparse points into a dense surface avoids the bias of matching dense
    /// points to a few far-apart neighbours.
    pub icp_from_sparser: bool,
    pub max_voxels: usize,
}

impl Default for MultiscaleParams {
    fn default() -> Self {
        MultiscaleParams {
            scales: vec![2.0, 3.0, 4.0, 5.0, 10.0],
            refine: RefineMode::None,
            grpc: GrpcParams::default(),
            icp_max_iter: 50,
            icp_tol: 1e-4,
            icp_max_pair_dist: None,
            icp_from_sparser: true,
            max_voxels: DEFAULT_MAX_VOXELS,
        }
    }
}

impl MultiscaleParams {
    pub fn icp_params(&self) -> IcpParams {
        let finest = self.scales.iter().copied().fold(f64::INFINITY, f64::min);
        IcpParams {
            max_iter: self.icp_max_iter,
            tol: self.icp_tol,
            max_pair_dist: self.icp_max_pair_dist.unwrap_or(2.0 * finest),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRegistration {
    pub scale: f64,
    /// Translation-only estimate from phase correlation.
    pub coarse: RigidTransform,
    pub phase: PhaseCorrelationResult,
    pub refined: Option<IcpOutcome>,
}

impl ScaleRegistration {
    /// Refined transform when present, the coarse one otherwise.
    pub fn best(&self) -> &RigidTransform {
        self.refined.as_ref().map_or(&self.coarse, |r| &r.transform)
    }
}

#[derive(Debug)]
pub struct ScaleOutcome {
    pub scale: f64,
    pub result: Result<ScaleRegistration, RegistrationError>,
}

fn run_scale(
    fixed: &PointCloud,
    moving: &PointCloud,
    scale: f64,
    refine: bool,
    params: &MultiscaleParams,
) -> Result<ScaleRegistration, RegistrationError> {
    let fb = fixed.bounds().ok_or_else(|| RegistrationError::Degenerate("fixed cloud is empty".into()))?;
    let mb = moving.bounds().ok_or_else(|| RegistrationError::Degenerate("moving cloud is empty".into()))?;
    let region = fb.union(&mb);
    let clock = std::time::Instant::now();
    let f = voxelize(fixed, scale, &region, params.max_voxels)?;
    let m = voxelize(moving, scale, &region, params.max_voxels)?;
    let phase = grpc_translation(&f, &m, &params.grpc)?;
    let coarse = RigidTransform::translation(phase.shift);
    log::debug!("scale {scale} m: phase correlation {:.1?}", clock.elapsed());
    let refined = if !refine {
        None
    } else if params.icp_from_sparser && moving.len() > fixed.len() {
        let mut out = icp_refine(moving, fixed, &coarse.inverse(), &params.icp_params())?;
        out.transform = out.transform.inverse();
        Some(out)
    } else {
        Some(icp_refine(fixed, moving, &coarse, &params.icp_params())?)
    };
    if refine {
        log::debug!("scale {scale} m: with ICP {:.1?}", clock.elapsed());
    }
    Ok(ScaleRegistration {
        scale,
        coarse,
        phase,
        refined,
    })
}

/// Runs GRPC at every scale (and ICP where requested). A failing scale is
/// reported in its own slot; the others still run.
pub fn register_multiscale(
    fixed: &PointCloud,
    moving: &PointCloud,
    params: &MultiscaleParams,
) -> Result<Vec<ScaleOutcome>, RegistrationError> {
    if params.scales.is_empty() {
        return Err(RegistrationError::Degenerate("no registration scales given".into()));
    }
    if let Some(bad) = params.scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(RegistrationError::Degenerate(format!("scale {bad} must be positive")));
    }
    let finest = params.scales.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(params
        .scales
        .par_iter()
        .map(|&scale| {
            let refine = match params.refine {
                RefineMode::None => false,
                RefineMode::Finest => scale == finest,
                RefineMode::All => true,
            };
            ScaleOutcome {
                scale,
                result: run_scale(fixed, moving, scale, refine, params).map_err(|e| {
                    RegistrationError::AtScale {
                        scale,
                        source: Box::new(e),
                    }
                }),
            }
        })
        .collect())
}
