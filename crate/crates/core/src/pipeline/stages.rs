use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde_json::json;

use super::config::{HeightSetting, PipelineConfig, RegistrationConfig};
use super::figures::emit_figure_data;
use super::manifest::{sha256_file, Manifest};
use super::map::{map_agb_with, MapOptions};
use super::plots::read_plots;
use super::{reproducible_timestamp, PipelineError};
use crate::allometry::{plot_agb, read_trees, write_plot_summary, write_tree_agb, ModelTable};
use crate::cloud::{load_cloud, save_cloud, CloudFormat, GridSpec, PointCloud, Raster, SourceKind};
use crate::metrics::{
    metric_table, spectral_indices, structural_metrics, HeightSource, Metric, MetricVector, MetricsError,
    NumericTable, SpectralBands,
};
use crate::registration::{
    apply_transform, evaluate_registration, register_multiscale, write_transform, NeighborGrid, RefineMode,
    RigidTransform, ScaleOutcome,
};
use crate::regression::{all_subsets, write_ranking_csv, DesignMatrix, LinearModel, Provenance, DEFAULT_MAX_CANDIDATES};
use crate::terrain::{build_chm_on, build_dsm, build_dtm, filter_ground, normalize_cloud, ChmStatus};

/// Artifact file names, relative to the output directory.
pub mod artifact {
    pub const LIDAR_MERGED: &str = "lidar_merged.bin";
    pub const STRIPS_REPORT: &str = "strips.json";
    pub const DAP_REGISTERED: &str = "dap_registered.bin";
    pub const TRANSFORM: &str = "transform.txt";
    pub const REGISTRATION_REPORT: &str = "registration.json";
    pub const REGISTRATION_HEIGHTS: &str = "registration_heights.csv";
    pub const LIDAR_GROUND: &str = "lidar_ground.bin";
    pub const DTM: &str = "dtm.asc";
    pub const DAP_NORMALIZED: &str = "dap_normalized.bin";
    pub const CHM: &str = "chm.asc";
    pub const DSM: &str = "dsm.asc";
    pub const TERRAIN_REPORT: &str = "terrain.json";
    pub const PLOT_METRICS: &str = "plot_metrics.csv";
    pub const TREE_AGB: &str = "tree_agb.csv";
    pub const PLOT_AGB: &str = "plot_agb.csv";
    pub const FIT_TABLE: &str = "fit_table.csv";
    pub const SUBSET_RANKING: &str = "subset_ranking.csv";
    pub const SUBSET_RANKING_ALL: &str = "subset_ranking_all.csv";
    pub const MODEL: &str = "model.toml";
    pub const AGB_MAP: &str = "agb_map.asc";
    pub const MAP_REPORT: &str = "map.json";
    pub const FIGURES_DIR: &str = "figures";
}

use artifact as a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Strips,
    Register,
    Terrain,
    Metrics,
    TreeAgb,
    Fit,
    Map,
    Figures,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Strips,
        Stage::Register,
        Stage::Terrain,
        Stage::Metrics,
        Stage::TreeAgb,
        Stage::Fit,
        Stage::Map,
        Stage::Figures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Strips => "strips",
            Stage::Register => "register",
            Stage::Terrain => "terrain",
            Stage::Metrics => "metrics",
            Stage::TreeAgb => "tree-agb",
            Stage::Fit => "fit",
            Stage::Map => "map",
            Stage::Figures => "figures",
        }
    }

    /// Artifacts of earlier stages this stage reads, with their producer.
    fn requires(self, cfg: &PipelineConfig) -> Vec<(&'static str, Stage)> {
        match self {
            Stage::Strips => vec![],
            Stage::Register => vec![(a::LIDAR_MERGED, Stage::Strips)],
            Stage::Terrain => vec![(a::LIDAR_MERGED, Stage::Strips), (a::DAP_REGISTERED, Stage::Register)],
            Stage::Metrics => match cfg.metrics.plot_heights {
                HeightSetting::Cloud => vec![(a::DAP_NORMALIZED, Stage::Terrain)],
                HeightSetting::Chm => vec![(a::CHM, Stage::Terrain)],
            },
            Stage::TreeAgb => vec![],
            Stage::Fit => vec![(a::PLOT_METRICS, Stage::Metrics), (a::PLOT_AGB, Stage::TreeAgb)],
            Stage::Map => {
                let mut v = vec![(a::CHM, Stage::Terrain)];
                if cfg.map.model.is_none() {
                    v.push((a::MODEL, Stage::Fit));
                }
                if cfg.map.from_cloud {
                    v.push((a::DAP_NORMALIZED, Stage::Terrain));
                }
                v
            }
            Stage::Figures => vec![
                (a::REGISTRATION_HEIGHTS, Stage::Register),
                (a::FIT_TABLE, Stage::Fit),
                (a::SUBSET_RANKING, Stage::Fit),
                (a::AGB_MAP, Stage::Map),
            ],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace('_', "-");
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == k)
            .ok_or_else(|| PipelineError::Validation(format!("unknown stage '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    /// Relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub stages: Vec<StageReport>,
}

/// Runs `stages` in workflow order after validating the config. Each stage
/// reads what it needs from the output directory and records its artifacts
/// in the manifest; a failing stage stops the run and leaves earlier
/// artifacts in place.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| PipelineError::Io(format!("{}: {e}", out.display())))?;
    let mut manifest = Manifest::load_or_default(&out)?;
    manifest.config_sha256 = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(cfg.to_toml_string().as_bytes()));
    let mut order = stages.to_vec();
    order.sort();
    order.dedup();
    let mut reports = Vec::new();
    for stage in order {
        for (file, producer) in stage.requires(cfg) {
            if !out.join(file).is_file() {
                return Err(PipelineError::MissingArtifact {
                    stage: producer.name(),
                    path: out.join(file).display().to_string(),
                });
            }
        }
        info!("stage {stage}");
        let files = run_stage(stage, cfg, &out).map_err(|e| match e {
            e @ (PipelineError::Validation(_) | PipelineError::MissingArtifact { .. }) => e,
            e => PipelineError::Stage {
                stage: stage.name(),
                source: Box::new(e),
            },
        })?;
        manifest.record(&out, stage.name(), &files)?;
        manifest.save(&out)?;
        reports.push(StageReport { stage, artifacts: files });
    }
    Ok(RunReport {
        out_dir: out,
        stages: reports,
    })
}

fn run_stage(stage: Stage, cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    match stage {
        Stage::Strips => stage_strips(cfg, out),
        Stage::Register => stage_register(cfg, out),
        Stage::Terrain => stage_terrain(cfg, out),
        Stage::Metrics => stage_metrics(cfg, out),
        Stage::TreeAgb => stage_tree_agb(cfg, out),
        Stage::Fit => stage_fit(cfg, out),
        Stage::Map => stage_map(cfg, out),
        Stage::Figures => emit_figure_data(out, &out.join(a::FIGURES_DIR)).map(|files| {
            files
                .into_iter()
                .map(|f| format!("{}/{}", a::FIGURES_DIR, f))
                .collect()
        }),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), PipelineError> {
    fs::write(path, serde_json::to_string_pretty(v).expect("json") + "\n").map_err(io_err(path))
}

fn load(path: &Path, source: SourceKind) -> Result<PointCloud, PipelineError> {
    Ok(load_cloud(path, CloudFormat::from_path(path), source)?)
}

fn save(path: &Path, cloud: &PointCloud) -> Result<(), PipelineError> {
    Ok(save_cloud(path, cloud, CloudFormat::BinaryRecord)?)
}

fn required(cfg: &PipelineConfig, p: &Option<PathBuf>, label: &str) -> Result<PathBuf, PipelineError> {
    p.as_ref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| PipelineError::Validation(format!("input.{label} is not set")))
}

fn load_bands(cfg: &PipelineConfig) -> Result<SpectralBands, PipelineError> {
    let raster = Raster::read_multiband(&required(cfg, &cfg.input.bands, "bands")?)?;
    Ok(SpectralBands::from_raster(&raster))
}

fn xyz(c: &PointCloud) -> Vec<[f64; 3]> {
    c.points().iter().map(|p| p.xyz()).collect()
}

/// Sum over `points` of the distance to the nearest grid point, each term capped at `cap`.
fn residual_sum(grid: &NeighborGrid, points: &[[f64; 3]], t: &RigidTransform, cap: f64) -> f64 {
    let d: Vec<f64> = points
        .par_iter()
        .map(|&p| grid.nearest(t.apply_xyz(p), cap).map_or(cap, |(_, d)| d))
        .collect();
    d.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripRegistration {
    pub strip: usize,
    /// Scale of the chosen estimate; `None` when no shift beat leaving the strip in place.
    pub scale: Option<f64>,
    pub transform: RigidTransform,
    pub residual_sum: f64,
    /// Every candidate: scale (`None` for no shift), shift, residual sum.
    pub candidates: Vec<(Option<f64>, [f64; 3], f64)>,
}

/// Aligns every strip to the frame of the first one. Each strip is
/// phase-correlated at every scale against the strips merged so far; the
/// shift with the lowest capped nearest-neighbour residual sum over the
/// strip's overlap wins (no shift is a candidate too).
pub fn register_strips(
    strips: &[PointCloud],
    cfg: &RegistrationConfig,
) -> Result<(PointCloud, Vec<StripRegistration>), PipelineError> {
    let first = strips
        .first()
        .ok_or_else(|| PipelineError::Validation("no LiDAR strips".into()))?;
    let finest = cfg.strip_scales.iter().copied().fold(f64::INFINITY, f64::min);
    let cap = 2.0 * finest;
    let mut reference = first.clone();
    let mut reports = Vec::new();
    for (k, strip) in strips.iter().enumerate().skip(1) {
        // Whole clouds, not their overlap: a common crop window would
        // correlate with itself at zero shift.
        let overlaps = match (reference.bounds(), strip.bounds()) {
            (Some(r), Some(s)) => r.intersection(&s).is_some_and(|o| o.horizontal_area() > 0.0),
            _ => false,
        };
        let (fixed, moving) = if overlaps {
            (reference.clone(), strip.clone())
        } else {
            (PointCloud::empty(SourceKind::Lidar), PointCloud::empty(SourceKind::Lidar))
        };
        let mut candidates = vec![(None, RigidTransform::identity())];
        if fixed.len() >= 10 && moving.len() >= 10 {
            let params = cfg.multiscale(&cfg.strip_scales, RefineMode::None);
            for o in register_multiscale(&fixed, &moving, &params)? {
                match o.result {
                    Ok(r) => candidates.push((Some(o.scale), r.coarse)),
                    Err(e) => warn!("strip {k}: {e}"),
                }
            }
        } else {
            warn!("strip {k} barely overlaps the strips before it; left in place");
        }
        let grid = NeighborGrid::with_density(xyz(&fixed), fixed.density(), cap);
        // Scored points: the strip inside the reference footprint, as nominally
        // georeferenced, so every candidate answers for the same points.
        let pts: Vec<[f64; 3]> = match fixed.bounds() {
            Some(b) => moving
                .points()
                .iter()
                .filter(|p| b.expanded(-cap).contains_xy(p.x, p.y))
                .map(|p| p.xyz())
                .collect(),
            None => Vec::new(),
        };
        let scored: Vec<(Option<f64>, RigidTransform, f64)> = candidates
            .into_iter()
            .map(|(s, t)| {
                let r = if grid.is_empty() || pts.is_empty() { 0.0 } else { residual_sum(&grid, &pts, &t, cap) };
                (s, t, r)
            })
            .collect();
        let best = scored
            .iter()
            .fold(&scored[0], |b, c| if c.2 < b.2 { c } else { b })
            .clone();
        let mut merged = reference.into_points();
        merged.extend(apply_transform(strip, &best.1).into_points());
        reference = first.derive(merged);
        reports.push(StripRegistration {
            strip: k,
            scale: best.0,
            transform: best.1,
            residual_sum: best.2,
            candidates: scored.iter().map(|(s, t, r)| (*s, t.translation_vector(), *r)).collect(),
        });
    }
    Ok((reference, reports))
}

fn stage_strips(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let strips: Vec<PointCloud> = cfg
        .input
        .lidar
        .iter()
        .map(|p| load(&cfg.resolve(p), SourceKind::Lidar))
        .collect::<Result<_, _>>()?;
    let (merged, reports) = register_strips(&strips, &cfg.registration)?;
    save(&out.join(a::LIDAR_MERGED), &merged)?;
    let rep: Vec<_> = reports
        .iter()
        .map(|r| {
            json!({
                "strip": r.strip,
                "scale": r.scale,
                "shift": r.transform.translation_vector(),
                "residual_sum": r.residual_sum,
                "candidates": r.candidates.iter().map(|(s, t, res)| json!({"scale": s, "shift": t, "residual_sum": res})).collect::<Vec<_>>(),
            })
        })
        .collect();
    write_json(
        &out.join(a::STRIPS_REPORT),
        &json!({"reference": 0, "points": merged.len(), "strips": rep}),
    )?;
    Ok(vec![a::LIDAR_MERGED.into(), a::STRIPS_REPORT.into()])
}

/// Horizontal 1 m buckets for radius searches over many points.
struct Buckets {
    cells: HashMap<(i64, i64), Vec<u32>>,
}

impl Buckets {
    fn new(points: &[[f64; 3]]) -> Buckets {
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry((p[0].floor() as i64, p[1].floor() as i64)).or_default().push(i as u32);
        }
        Buckets { cells }
    }

    fn within(&self, x: f64, y: f64, r: f64) -> impl Iterator<Item = u32> + '_ {
        let (x0, x1) = ((x - r).floor() as i64, (x + r).floor() as i64);
        let (y0, y1) = ((y - r).floor() as i64, (y + r).floor() as i64);
        (y0..=y1)
            .flat_map(move |cy| (x0..=x1).map(move |cx| (cx, cy)))
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .copied()
    }
}

/// Capped nearest-neighbour residual sum of every registered scale: the
/// points of `fixed` pulled back through each estimate and matched against
/// `moving` (pass the sparser cloud as `fixed`). Returns the residuals and
/// the index of the lowest; ties go to the earlier scale.
pub fn scale_residuals(
    fixed: &PointCloud,
    moving: &PointCloud,
    outcomes: &[ScaleOutcome],
    cap: f64,
) -> (Vec<Option<f64>>, Option<usize>) {
    let grid = NeighborGrid::with_density(xyz(moving), moving.density(), cap);
    let pts = xyz(fixed);
    let res: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.result.as_ref().ok().map(|r| residual_sum(&grid, &pts, &r.best().inverse(), cap)))
        .collect();
    let mut best: Option<usize> = None;
    for (i, r) in res.iter().enumerate() {
        if let Some(r) = r {
            if best.is_none_or(|b| *r < res[b].unwrap()) {
                best = Some(i);
            }
        }
    }
    (res, best)
}

fn stage_register(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let rc = &cfg.registration;
    let lidar = load(&out.join(a::LIDAR_MERGED), SourceKind::Lidar)?;
    let dap = load(&required(cfg, &cfg.input.dap, "dap")?, SourceKind::Dap)?;
    let params = rc.multiscale(&rc.scales, rc.refine.into());
    let clock = std::time::Instant::now();
    let outcomes: Vec<ScaleOutcome> = register_multiscale(&lidar, &dap, &params)?;
    debug!("multiscale registration: {:.1?}", clock.elapsed());
    if outcomes.iter().all(|o| o.result.is_err()) {
        let first = outcomes.into_iter().next().and_then(|o| o.result.err());
        return Err(first.map_or(PipelineError::Failed("no scale registered".into()), Into::into));
    }

    let (residuals, _) = scale_residuals(&lidar, &dap, &outcomes, params.icp_params().max_pair_dist);
    debug!("scale residuals: {:.1?}", clock.elapsed());
    let dap_pts = xyz(&dap);
    let lidar_pts = xyz(&lidar);

    // Tree heights for the evaluation report.
    let trees = match &cfg.input.trees {
        Some(p) => read_trees(&cfg.resolve(p))?,
        None => Vec::new(),
    };
    let radius = rc.evaluation_radius;
    let ground: Vec<Option<f64>> = trees
        .par_iter()
        .map(|t| {
            lidar_pts
                .iter()
                .filter(|p| (p[0] - t.x).powi(2) + (p[1] - t.y).powi(2) <= 9.0)
                .map(|p| p[2])
                .min_by(f64::total_cmp)
        })
        .collect();
    let buckets = Buckets::new(&dap_pts);

    struct Scored {
        scale: f64,
        transform: RigidTransform,
        residual_sum: f64,
        heights: Vec<Option<f64>>,
    }
    let mut scored = Vec::new();
    let mut scale_reports = Vec::new();
    for (o, residual) in outcomes.iter().zip(residuals) {
        let r = match &o.result {
            Ok(r) => r,
            Err(e) => {
                warn!("{e}");
                scale_reports.push(json!({"scale": o.scale, "error": e.to_string()}));
                continue;
            }
        };
        let t = *r.best();
        let residual = residual.expect("registered scale has a residual");
        let inv = t.inverse();
        let heights: Vec<Option<f64>> = trees
            .par_iter()
            .zip(&ground)
            .map(|(tr, g)| {
                let g = (*g)?;
                let c = inv.apply_xyz([tr.x, tr.y, g + tr.height]);
                buckets
                    .within(c[0], c[1], radius + 1.0)
                    .map(|i| t.apply_xyz(dap_pts[i as usize]))
                    .filter(|p| (p[0] - tr.x).powi(2) + (p[1] - tr.y).powi(2) <= radius * radius)
                    .map(|p| p[2])
                    .max_by(f64::total_cmp)
                    .map(|top| top - g)
            })
            .collect();
        let (ext, meas): (Vec<f64>, Vec<f64>) = heights
            .iter()
            .zip(&trees)
            .filter_map(|(h, t)| h.map(|h| (h, t.height)))
            .unzip();
        let evaluation = match evaluate_registration(&ext, &meas) {
            Ok(e) => json!({"pearson_r": e.pearson_r, "r_squared": e.r_squared, "rmse": e.rmse, "slope": e.slope, "intercept": e.intercept, "n": e.n}),
            Err(e) => json!({"error": e.to_string()}),
        };
        scale_reports.push(json!({
            "scale": o.scale,
            "phase_shift": r.coarse.translation_vector(),
            "inlier_fraction": r.phase.inlier_fraction,
            "phase_residual": r.phase.residual,
            "refined": r.refined.as_ref().map(|i| json!({
                "translation": i.transform.translation_vector(),
                "rotation_angle": i.transform.rotation_angle(),
                "iterations": i.iterations,
                "pairs": i.pairs,
                "mean_pair_distance": i.mean_distances.last(),
            })),
            "translation": t.translation_vector(),
            "residual_sum": residual,
            "evaluation": evaluation,
        }));
        scored.push(Scored {
            scale: o.scale,
            transform: t,
            residual_sum: residual,
            heights,
        });
    }
    let best = scored
        .iter()
        .fold(&scored[0], |b, c| if c.residual_sum < b.residual_sum { c } else { b });
    info!("registration: scale {} m selected", best.scale);
    save(&out.join(a::DAP_REGISTERED), &apply_transform(&dap, &best.transform))?;
    write_transform(
        &out.join(a::TRANSFORM),
        &best.transform,
        &format!("DAP to LiDAR, {} m scale", best.scale),
    )?;
    write_json(
        &out.join(a::REGISTRATION_REPORT),
        &json!({"selected_scale": best.scale, "scales": scale_reports}),
    )?;

    let path = out.join(a::REGISTRATION_HEIGHTS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| PipelineError::Io(e.to_string()))?;
    let mut header = vec!["tree_id".to_string(), "measured".to_string()];
    header.extend(scored.iter().map(|s| format!("scale_{}", s.scale)));
    w.write_record(&header).map_err(|e| PipelineError::Io(e.to_string()))?;
    for (i, t) in trees.iter().enumerate() {
        let mut rec = vec![t.id.clone(), t.height.to_string()];
        rec.extend(scored.iter().map(|s| s.heights[i].map_or(String::new(), |h| h.to_string())));
        w.write_record(&rec).map_err(|e| PipelineError::Io(e.to_string()))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(vec![
        a::DAP_REGISTERED.into(),
        a::TRANSFORM.into(),
        a::REGISTRATION_REPORT.into(),
        a::REGISTRATION_HEIGHTS.into(),
    ])
}

/// CHM grid: co-registered with the band raster when there is one, so map
/// cells and band cells share an origin; otherwise covering the cloud.
fn chm_grid(cfg: &PipelineConfig, normalized: &PointCloud) -> Result<GridSpec, PipelineError> {
    let cell = cfg.terrain.chm_cell;
    match &cfg.input.bands {
        Some(_) => {
            let g = *load_bands(cfg)?.grid();
            let n = |len: f64| ((len / cell - 1e-9).ceil() as usize).max(1);
            Ok(GridSpec {
                origin: g.origin,
                cell_size: cell,
                nrows: n(g.nrows as f64 * g.cell_size),
                ncols: n(g.ncols as f64 * g.cell_size),
            })
        }
        None => {
            let b = normalized
                .bounds()
                .ok_or_else(|| PipelineError::Failed("normalized cloud is empty".into()))?;
            Ok(GridSpec::covering(&b, cell))
        }
    }
}

fn stage_terrain(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let lidar = load(&out.join(a::LIDAR_MERGED), SourceKind::Lidar)?;
    let g = filter_ground(&lidar, &cfg.terrain.ground_params())?;
    save(&out.join(a::LIDAR_GROUND), &g.labelled(&lidar))?;
    let dtm = build_dtm(&g.ground, cfg.terrain.dtm_cell)?;
    dtm.write_ascii(&out.join(a::DTM))?;
    let dap = load(&out.join(a::DAP_REGISTERED), SourceKind::Dap)?;
    let norm = normalize_cloud(&dap, &dtm)?;
    if norm.dropped > 0 {
        warn!("{} DAP points over nodata terrain dropped", norm.dropped);
    }
    save(&out.join(a::DAP_NORMALIZED), &norm.cloud)?;
    let grid = chm_grid(cfg, &norm.cloud)?;
    let chm = build_chm_on(&norm.cloud, grid)?;
    chm.chm.write_ascii(&out.join(a::CHM))?;
    let mut files = vec![
        a::LIDAR_GROUND.to_string(),
        a::DTM.into(),
        a::DAP_NORMALIZED.into(),
        a::CHM.into(),
    ];
    if cfg.terrain.emit_dsm {
        build_dsm(&dap, grid)?.write_ascii(&out.join(a::DSM))?;
        files.push(a::DSM.into());
    }
    write_json(
        &out.join(a::TERRAIN_REPORT),
        &json!({
            "ground_points": g.ground.len(),
            "seeds": g.seeds,
            "accepted_per_iteration": g.accepted_per_iteration,
            "normalized_points": norm.cloud.len(),
            "dropped_points": norm.dropped,
            "chm_status": match chm.status { ChmStatus::Complete => "complete", ChmStatus::Sparse => "sparse" },
            "chm_occupied_cells": chm.occupied_cells,
        }),
    )?;
    files.push(a::TERRAIN_REPORT.into());
    Ok(files)
}

fn stage_metrics(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let bands = load_bands(cfg)?;
    let plots = read_plots(&required(cfg, &cfg.input.plots, "plots")?)?;
    let cloud;
    let chm;
    let src = match cfg.metrics.plot_heights {
        HeightSetting::Cloud => {
            cloud = load(&out.join(a::DAP_NORMALIZED), SourceKind::Dap)?;
            HeightSource::Cloud(&cloud)
        }
        HeightSetting::Chm => {
            chm = Raster::read_ascii(&out.join(a::CHM), "chm")?;
            HeightSource::Chm(&chm)
        }
    };
    let opts = cfg.metrics.spectral_options();
    let rows: Vec<MetricVector> = plots
        .par_iter()
        .map(|p| -> Result<MetricVector, PipelineError> {
            let fp = p.footprint();
            let mut mv = MetricVector::new(p.plot_id.clone());
            match spectral_indices(&bands, &fp, &Metric::SPECTRAL, opts) {
                Ok(v) => mv.merge(&v),
                Err(MetricsError::EmptyFootprint(m)) => warn!("plot {}: {m}", p.plot_id),
                Err(e) => return Err(e.into()),
            }
            match structural_metrics(src, &fp, cfg.metrics.cover_threshold) {
                Ok(v) => mv.merge(&v),
                Err(MetricsError::EmptyFootprint(m)) => warn!("plot {}: {m}", p.plot_id),
                Err(e) => return Err(e.into()),
            }
            Ok(mv)
        })
        .collect::<Result<_, _>>()?;
    metric_table(&rows).write_csv(&out.join(a::PLOT_METRICS))?;
    Ok(vec![a::PLOT_METRICS.into()])
}

fn stage_tree_agb(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let plots = read_plots(&required(cfg, &cfg.input.plots, "plots")?)?;
    let table = match &cfg.allometry.overrides {
        Some(p) => ModelTable::with_overrides(&cfg.resolve(p))?,
        None => ModelTable::default(),
    };
    let mut files = Vec::new();
    let summary: Vec<(String, usize, f64)> = match &cfg.input.trees {
        Some(p) => {
            let trees = read_trees(&cfg.resolve(p))?;
            let agb = trees
                .iter()
                .map(|t| table.tree_agb(t.species, t.height, t.dbh))
                .collect::<Result<Vec<_>, _>>()?;
            write_tree_agb(&out.join(a::TREE_AGB), &table, &trees, &agb)?;
            files.push(a::TREE_AGB.to_string());
            plots
                .iter()
                .map(|p| {
                    plot_agb(&table, &trees, &p.polygon(), p.area()).map(|r| (p.plot_id.clone(), r.trees.len(), r.density_t_ha))
                })
                .collect::<Result<_, _>>()?
        }
        None => plots
            .iter()
            .map(|p| {
                p.agb_obs.map(|v| (p.plot_id.clone(), 0, v)).ok_or_else(|| {
                    PipelineError::Validation(format!("plot {} has no agb_obs and no tree records are given", p.plot_id))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    write_plot_summary(&out.join(a::PLOT_AGB), &summary)?;
    files.push(a::PLOT_AGB.into());
    Ok(files)
}

fn stage_fit(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let rc = &cfg.regression;
    let mut table = NumericTable::read_csv(&out.join(a::PLOT_METRICS))?;
    let agb = NumericTable::read_csv(&out.join(a::PLOT_AGB))?;
    let col = agb
        .column("agb_t_ha")
        .ok_or_else(|| PipelineError::Failed(format!("{} lacks agb_t_ha", a::PLOT_AGB)))?;
    let values: Vec<(String, Option<f64>)> = agb.ids().iter().cloned().zip(col).collect();
    table.set_column(&rc.response, &values);
    table.write_csv(&out.join(a::FIT_TABLE))?;
    let x = DesignMatrix::from_table(&table, &rc.response, &rc.candidates)?;
    if !x.dropped().is_empty() {
        warn!("plots without complete metrics left out of the fit: {}", x.dropped().join(", "));
    }
    let report = all_subsets(&x, rc.max_size, DEFAULT_MAX_CANDIDATES, rc.loocv)?;
    write_ranking_csv(&out.join(a::SUBSET_RANKING), &report, false)?;
    write_ranking_csv(&out.join(a::SUBSET_RANKING_ALL), &report, true)?;
    let best = report
        .best()
        .ok_or_else(|| PipelineError::Failed("no predictor subset could be fitted".into()))?;
    let mut model: LinearModel = best.model.clone();
    model.provenance = Some(Provenance {
        source: "run".into(),
        data_sha256: Some(x.content_hash()),
        created: reproducible_timestamp(),
    });
    model.save(&out.join(a::MODEL))?;
    Ok(vec![
        a::FIT_TABLE.into(),
        a::SUBSET_RANKING.into(),
        a::SUBSET_RANKING_ALL.into(),
        a::MODEL.into(),
    ])
}

fn stage_map(cfg: &PipelineConfig, out: &Path) -> Result<Vec<String>, PipelineError> {
    let model_path = cfg.map.model.as_ref().map_or_else(|| out.join(a::MODEL), |p| cfg.resolve(p));
    let model = LinearModel::load(&model_path)?;
    let chm = Raster::read_ascii(&out.join(a::CHM), "chm")?;
    let bands = load_bands(cfg)?;
    let cloud;
    let heights = if cfg.map.from_cloud {
        cloud = load(&out.join(a::DAP_NORMALIZED), SourceKind::Dap)?;
        HeightSource::Cloud(&cloud)
    } else {
        HeightSource::Chm(&chm)
    };
    let opts = MapOptions {
        cell_size: cfg.map.cell_size,
        cover_threshold: cfg.metrics.cover_threshold,
        spectral: cfg.metrics.spectral_options(),
        min_defined_fraction: cfg.map.min_defined_fraction,
    };
    let m = map_agb_with(&chm, heights, &bands, &model, &opts)?;
    m.raster.write_ascii(&out.join(a::AGB_MAP))?;
    let (model_sha, _) = sha256_file(&model_path)?;
    write_json(
        &out.join(a::MAP_REPORT),
        &json!({
            "cell_size": opts.cell_size,
            "structural_source": if cfg.map.from_cloud { "cloud" } else { "chm" },
            "model_sha256": model_sha,
            "predictors": model.predictors,
            "cells": m.raster.grid().len(),
            "defined_cells": m.defined_cells,
            "clamped_cells": m.clamped_cells,
        }),
    )?;
    Ok(vec![a::AGB_MAP.into(), a::MAP_REPORT.into()])
}
