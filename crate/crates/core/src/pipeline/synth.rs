//! Deterministic synthetic forest scene used to exercise the whole workflow.
//!
//! Terrain is a smooth analytic surface; trees are rounded cones with a flat
//! crown base. The DAP-like cloud samples the visible surface densely and is
//! displaced by a known rigid offset. The LiDAR-like cloud is sparse, comes
//! in overlapping strips with their own small offsets, and reaches the ground
//! under crowns. Band reflectances are constant per mapping block up to a
//! zero-mean checkerboard, chosen so that a planted linear model of the block
//! indices reproduces the block's tree biomass density.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::plots::{write_plots, PlotDefinition};
use super::PipelineError;
use crate::allometry::{ModelTable, SpeciesCode, TreeRecord};
use crate::cloud::{save_cloud, CloudFormat, GridSpec, Point3D, PointCloud, Raster, SourceKind};
use crate::metrics::SpectralBands;
use crate::regression::{LinearModel, Provenance};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub seed: u64,
    /// Lower-left corner of the square scene.
    pub origin: (f64, f64),
    pub extent: f64,
    pub terrain_base: f64,
    pub terrain_amplitude: f64,
    pub terrain_wavelength: f64,
    pub n_trees: usize,
    pub height_range: (f64, f64),
    /// Points per square meter.
    pub dap_density: f64,
    pub lidar_density: f64,
    pub lidar_strips: usize,
    /// Overlap between neighbouring strips, meters.
    pub strip_overlap: f64,
    /// Added to every DAP point.
    pub dap_offset: [f64; 3],
    /// Vertical noise standard deviation, meters.
    pub noise_sd: f64,
    pub band_cell: f64,
    /// Side of the blocks with constant planted reflectance; also the mapping cell.
    pub block_size: f64,
    pub n_plots: usize,
    pub plot_side: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            seed: 42,
            origin: (400_000.0, 3_000_000.0),
            extent: 150.0,
            terrain_base: 2500.0,
            terrain_amplitude: 10.0,
            terrain_wavelength: 200.0,
            n_trees: 250,
            height_range: (8.0, 30.0),
            dap_density: 42.0,
            lidar_density: 0.6,
            lidar_strips: 3,
            strip_overlap: 30.0,
            dap_offset: [5.0, -3.0, 1.2],
            noise_sd: 0.02,
            band_cell: 0.5,
            block_size: 15.0,
            n_plots: 34,
            plot_side: 30.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let pos = [
            self.extent,
            self.terrain_wavelength,
            self.dap_density,
            self.lidar_density,
            self.band_cell,
            self.block_size,
            self.plot_side,
        ];
        let ok = pos.iter().all(|v| *v > 0.0 && v.is_finite())
            && self.height_range.0 >= 2.0
            && self.height_range.1 >= self.height_range.0
            && self.lidar_strips >= 1
            && self.strip_overlap >= 0.0
            && self.noise_sd >= 0.0
            && self.plot_side <= self.extent
            && (self.extent / self.band_cell).fract() == 0.0
            && (self.block_size / self.band_cell).fract() == 0.0;
        if ok {
            Ok(())
        } else {
            Err(PipelineError::Validation(format!("invalid scene parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTree {
    pub id: String,
    pub species: SpeciesCode,
    pub x: f64,
    pub y: f64,
    /// Apex height above terrain.
    pub height: f64,
    pub crown_radius: f64,
    pub crown_depth: f64,
    /// Allometric above-ground biomass, kg.
    pub agb_kg: f64,
}

impl PlantedTree {
    fn crown_top(&self, x: f64, y: f64) -> Option<f64> {
        let r = ((x - self.x).powi(2) + (y - self.y).powi(2)).sqrt();
        (r < self.crown_radius).then(|| self.height - self.crown_depth * (r / self.crown_radius).powf(1.5))
    }
}

/// What a LiDAR sample hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Ground,
    Canopy,
    /// The exact top of a planted tree.
    Apex,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub params: SceneParams,
    pub trees: Vec<PlantedTree>,
    pub dap: PointCloud,
    /// Strips as delivered, each displaced by its entry in `strip_offsets`.
    pub lidar_strips: Vec<PointCloud>,
    pub strip_offsets: Vec<[f64; 3]>,
    /// Per strip and point.
    pub lidar_kinds: Vec<Vec<SampleKind>>,
    pub bands: SpectralBands,
    pub plots: Vec<PlotDefinition>,
    pub planted_model: LinearModel,
    /// Planted model evaluated on each block's band means, t/ha.
    pub planted_agb: Raster,
}

struct TreeIndex {
    cell: f64,
    origin: (f64, f64),
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl TreeIndex {
    fn new(trees: &[PlantedTree], p: &SceneParams) -> TreeIndex {
        let cell = trees.iter().map(|t| t.crown_radius).fold(1.0, f64::max);
        let n = (p.extent / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); n * n];
        for (i, t) in trees.iter().enumerate() {
            let (c, r) = (
                ((t.x - p.origin.0) / cell).floor() as usize,
                ((t.y - p.origin.1) / cell).floor() as usize,
            );
            buckets[r * n + c].push(i);
        }
        TreeIndex {
            cell,
            origin: p.origin,
            n,
            buckets,
        }
    }

    /// Highest crown over (x, y), if any.
    fn crown_top(&self, trees: &[PlantedTree], x: f64, y: f64) -> Option<f64> {
        let c = ((x - self.origin.0) / self.cell).floor() as i64;
        let r = ((y - self.origin.1) / self.cell).floor() as i64;
        let mut best: Option<f64> = None;
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= self.n as i64 || cc >= self.n as i64 {
                    continue;
                }
                for &i in &self.buckets[rr as usize * self.n + cc as usize] {
                    if let Some(z) = trees[i].crown_top(x, y) {
                        best = Some(best.map_or(z, |b: f64| b.max(z)));
                    }
                }
            }
        }
        best
    }
}

/// Planted model: biomass density from NDVI and DVI of the block means.
const PLANTED: (f64, f64, f64) = (-60.0, 120.0, 400.0);

fn planted_model() -> LinearModel {
    let mut m = LinearModel::new(vec!["NDVI".into(), "DVI".into()], vec![PLANTED.1, PLANTED.2], PLANTED.0)
        .expect("valid planted model");
    m.response = Some("agb_t_ha".into());
    m.provenance = Some(Provenance {
        source: "synthetic".into(),
        data_sha256: None,
        created: "1970-01-01T00:00:00Z".into(),
    });
    m
}

fn planted_value(red: f64, nir: f64) -> f64 {
    PLANTED.0 + PLANTED.1 * (nir - red) / (nir + red) + PLANTED.2 * (nir - red)
}

/// NIR reflectance in (red, 0.95] whose planted value is closest to `target`.
fn solve_nir(red: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (red, 0.95);
    if planted_value(red, hi) <= target {
        return hi;
    }
    if planted_value(red, lo) >= target {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if planted_value(red, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl SyntheticScene {
    pub fn terrain_height(&self, x: f64, y: f64) -> f64 {
        terrain(&self.params, x, y)
    }

    /// Every strip with its offset removed, in the true frame.
    pub fn lidar_true_frame(&self) -> PointCloud {
        let pts = self
            .lidar_strips
            .iter()
            .zip(&self.strip_offsets)
            .flat_map(|(s, o)| {
                s.points().iter().map(move |p| Point3D {
                    x: p.x - o[0],
                    y: p.y - o[1],
                    z: p.z - o[2],
                    ..*p
                })
            })
            .collect();
        PointCloud::new(pts, SourceKind::Lidar)
    }

    /// Strips merged as delivered.
    pub fn lidar_merged(&self) -> PointCloud {
        PointCloud::merge(&self.lidar_strips).expect("at least one strip")
    }

    /// Tree records as a field inventory would deliver them.
    pub fn tree_records(&self) -> Vec<TreeRecord> {
        self.trees
            .iter()
            .map(|t| TreeRecord {
                id: t.id.clone(),
                species: t.species,
                x: t.x,
                y: t.y,
                height: t.height,
                dbh: None,
                crown: None,
            })
            .collect()
    }

    /// Map grid: `block_size` cells over the scene, top-left anchored.
    pub fn block_grid(&self) -> GridSpec {
        block_grid(&self.params)
    }
}

fn terrain(p: &SceneParams, x: f64, y: f64) -> f64 {
    let k = std::f64::consts::TAU / p.terrain_wavelength;
    p.terrain_base + p.terrain_amplitude * (k * (x - p.origin.0)).sin() * (k * (y - p.origin.1)).cos()
}

fn block_grid(p: &SceneParams) -> GridSpec {
    let n = (p.extent / p.block_size).ceil() as usize;
    GridSpec {
        origin: (p.origin.0, p.origin.1 + p.extent),
        cell_size: p.block_size,
        nrows: n,
        ncols: n,
    }
}

fn plant_trees(p: &SceneParams, rng: &mut ChaCha8Rng, table: &ModelTable) -> Result<Vec<PlantedTree>, PipelineError> {
    let mut trees: Vec<PlantedTree> = Vec::with_capacity(p.n_trees);
    let mut attempts = 0usize;
    while trees.len() < p.n_trees {
        attempts += 1;
        if attempts > 200 * p.n_trees.max(1) {
            return Err(PipelineError::Validation(format!(
                "could only place {} of {} trees without covering an apex",
                trees.len(),
                p.n_trees
            )));
        }
        let h = rng.random_range(p.height_range.0..=p.height_range.1);
        let radius = 0.15 * h + 1.0;
        let x = p.origin.0 + rng.random_range(radius..p.extent - radius);
        let y = p.origin.1 + rng.random_range(radius..p.extent - radius);
        let species = SpeciesCode::ALL[rng.random_range(0..SpeciesCode::ALL.len())];
        // No crown may reach over another tree's apex.
        if trees
            .iter()
            .any(|t| ((t.x - x).powi(2) + (t.y - y).powi(2)).sqrt() < t.crown_radius.max(radius) + 0.5)
        {
            continue;
        }
        let agb = table.tree_agb(species, h, None).map_err(|e| PipelineError::Validation(e.to_string()))?;
        trees.push(PlantedTree {
            id: format!("T{:04}", trees.len() + 1),
            species,
            x,
            y,
            height: h,
            crown_radius: radius,
            crown_depth: 0.6 * h,
            agb_kg: agb.total * table.mass_unit.tonnes_per_unit() * 1000.0,
        });
    }
    Ok(trees)
}

fn sample_xy(p: &SceneParams, rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            (
                p.origin.0 + rng.random_range(0.0..p.extent),
                p.origin.1 + rng.random_range(0.0..p.extent),
            )
        })
        .collect()
}

fn synth_bands(
    p: &SceneParams,
    rng: &mut ChaCha8Rng,
    trees: &[PlantedTree],
) -> Result<(SpectralBands, Raster), PipelineError> {
    let blocks = block_grid(p);
    let mut base = Vec::with_capacity(blocks.len());
    let mut planted = vec![f64::NAN; blocks.len()];
    let block_ha = p.block_size * p.block_size / 10_000.0;
    for b in 0..blocks.len() {
        let (cx, cy) = blocks.cell_center(b / blocks.ncols, b % blocks.ncols);
        let half = p.block_size / 2.0;
        let kg: f64 = trees
            .iter()
            .filter(|t| t.x >= cx - half && t.x < cx + half && t.y > cy - half && t.y <= cy + half)
            .map(|t| t.agb_kg)
            .sum();
        let target = (kg / 1000.0 / block_ha).min(250.0);
        let blue = rng.random_range(0.02..0.06);
        let green = rng.random_range(0.05..0.12);
        let red = rng.random_range(0.03..0.08);
        let red_edge = rng.random_range(0.15..0.30);
        let nir = solve_nir(red, target);
        base.push([blue, green, red, red_edge, nir]);
        planted[b] = planted_value(red, nir).max(0.0);
    }
    let n = (p.extent / p.band_cell).round() as usize;
    let grid = GridSpec {
        origin: (p.origin.0, p.origin.1 + p.extent),
        cell_size: p.band_cell,
        nrows: n,
        ncols: n,
    };
    // Checkerboard of +-delta inside each block keeps block means at the base value.
    let delta = 0.004;
    let per_block = (p.block_size / p.band_cell).round() as usize;
    let mut values: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; grid.len()]);
    for r in 0..n {
        for c in 0..n {
            let b = (r / per_block).min(blocks.nrows - 1) * blocks.ncols + (c / per_block).min(blocks.ncols - 1);
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            for (k, v) in values.iter_mut().enumerate() {
                v[r * n + c] = base[b][k] + sign * delta;
            }
        }
    }
    let bands = SpectralBands::from_values(grid, values.map(Some)).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let planted = Raster::from_band(blocks, "agb_t_ha", planted).map_err(|e| PipelineError::Validation(e.to_string()))?;
    Ok((bands, planted))
}

/// Builds the scene for `params`. Identical parameters give identical scenes.
pub fn generate_synthetic_scene(params: &SceneParams) -> Result<SyntheticScene, PipelineError> {
    params.validate()?;
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let table = ModelTable::default();
    let trees = plant_trees(p, &mut rng, &table)?;
    let index = TreeIndex::new(&trees, p);
    let noise = Normal::new(0.0, p.noise_sd).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let area = p.extent * p.extent;

    // DAP: visible surface only.
    let xy = sample_xy(p, &mut rng, (p.dap_density * area).round() as usize);
    let dz: Vec<f64> = (0..xy.len()).map(|_| noise.sample(&mut rng)).collect();
    let dap: Vec<Point3D> = xy
        .par_iter()
        .zip(&dz)
        .map(|(&(x, y), dz)| {
            let g = terrain(p, x, y);
            let (z, color) = match index.crown_top(&trees, x, y) {
                Some(h) => (g + h, [46, 112, 52]),
                None => (g, [128, 108, 82]),
            };
            Point3D::new(x + p.dap_offset[0], y + p.dap_offset[1], z + dz + p.dap_offset[2]).with_color(color)
        })
        .collect();
    let dap = PointCloud::new(dap, SourceKind::Dap);

    // LiDAR: strips along x, splitting y with overlap.
    let width = p.extent / p.lidar_strips as f64;
    let strip_span = |k: usize| {
        let lo = (k as f64 * width - p.strip_overlap / 2.0).max(0.0);
        let hi = ((k + 1) as f64 * width + p.strip_overlap / 2.0).min(p.extent);
        (lo, hi)
    };
    let strip_offsets: Vec<[f64; 3]> = (0..p.lidar_strips)
        .map(|k| match k {
            0 => [0.0; 3],
            k if k % 2 == 1 => [0.06, -0.04, 0.03],
            _ => [-0.05, 0.03, -0.02],
        })
        .collect();
    let mut strips: Vec<Vec<Point3D>> = vec![Vec::new(); p.lidar_strips];
    let mut kinds: Vec<Vec<SampleKind>> = vec![Vec::new(); p.lidar_strips];
    let n_lidar = (p.lidar_density * area).round() as usize;
    let mut push = |k: usize, x: f64, y: f64, z: f64, kind: SampleKind| {
        let o = strip_offsets[k];
        let intensity = if kind == SampleKind::Ground { 0.3 } else { 0.6 };
        strips[k].push(Point3D::new(x + o[0], y + o[1], z + o[2]).with_intensity(intensity));
        kinds[k].push(kind);
    };
    for (x, y) in sample_xy(p, &mut rng, n_lidar) {
        let ly = y - p.origin.1;
        let covering: Vec<usize> = (0..p.lidar_strips)
            .filter(|&k| {
                let (lo, hi) = strip_span(k);
                ly >= lo && ly <= hi
            })
            .collect();
        let k = covering[rng.random_range(0..covering.len())];
        let g = terrain(p, x, y);
        let hit_canopy = rng.random_bool(0.5);
        let dz = noise.sample(&mut rng);
        match index.crown_top(&trees, x, y) {
            Some(h) if hit_canopy => push(k, x, y, g + h + dz, SampleKind::Canopy),
            _ => push(k, x, y, g + dz, SampleKind::Ground),
        }
    }
    for t in &trees {
        let ly = t.y - p.origin.1;
        let k = (0..p.lidar_strips)
            .find(|&k| {
                let (lo, hi) = strip_span(k);
                ly >= lo && ly <= hi
            })
            .expect("strips cover the scene");
        push(k, t.x, t.y, terrain(p, t.x, t.y) + t.height, SampleKind::Apex);
    }
    let lidar_strips = strips.into_iter().map(|s| PointCloud::new(s, SourceKind::Lidar)).collect();

    let (bands, planted_agb) = synth_bands(p, &mut rng, &trees)?;

    let half = p.plot_side / 2.0;
    let plots = (0..p.n_plots)
        .map(|i| PlotDefinition {
            plot_id: format!("P{:02}", i + 1),
            center_x: p.origin.0 + rng.random_range(half..p.extent - half),
            center_y: p.origin.1 + rng.random_range(half..p.extent - half),
            side: p.plot_side,
            agb_obs: None,
        })
        .collect();

    Ok(SyntheticScene {
        params: p.clone(),
        trees,
        dap,
        lidar_strips,
        strip_offsets,
        lidar_kinds: kinds,
        bands,
        plots,
        planted_model: planted_model(),
        planted_agb,
    })
}

/// Files written by [`write_scene`], relative to its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub config: PathBuf,
    pub dap: PathBuf,
    pub lidar: Vec<PathBuf>,
    pub bands: PathBuf,
    pub trees: PathBuf,
    pub plots: PathBuf,
    pub truth_dir: PathBuf,
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(header).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// Writes inputs, a ready-to-run `config.toml` and a `truth/` directory.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<SceneFiles, PipelineError> {
    let truth = dir.join("truth");
    fs::create_dir_all(&truth).map_err(|e| write_err(&truth, e))?;
    let p = &scene.params;

    let dap = PathBuf::from("dap.bin");
    save_cloud(&dir.join(&dap), &scene.dap, CloudFormat::BinaryRecord).map_err(|e| write_err(&dap, e))?;
    let mut lidar = Vec::new();
    for (k, s) in scene.lidar_strips.iter().enumerate() {
        let f = PathBuf::from(format!("lidar_strip_{k}.bin"));
        save_cloud(&dir.join(&f), s, CloudFormat::BinaryRecord).map_err(|e| write_err(&f, e))?;
        lidar.push(f);
    }
    let raster = scene.bands.to_raster().map_err(|e| PipelineError::Validation(e.to_string()))?;
    let manifest = raster.write_multiband(&dir.join("bands"), "bands").map_err(|e| write_err(dir, e))?;
    let bands = manifest.strip_prefix(dir).expect("inside dir").to_path_buf();

    let trees = PathBuf::from("trees.csv");
    write_csv(
        &dir.join(&trees),
        &["id", "species", "x", "y", "height"],
        scene
            .trees
            .iter()
            .map(|t| vec![t.id.clone(), t.species.to_string(), t.x.to_string(), t.y.to_string(), t.height.to_string()]),
    )?;
    let plots = PathBuf::from("plots.csv");
    write_plots(&dir.join(&plots), &scene.plots)?;

    // Ground truth.
    write_csv(
        &truth.join("trees.csv"),
        &["id", "species", "x", "y", "height", "crown_radius", "crown_depth", "agb_kg"],
        scene.trees.iter().map(|t| {
            vec![
                t.id.clone(),
                t.species.to_string(),
                t.x.to_string(),
                t.y.to_string(),
                t.height.to_string(),
                t.crown_radius.to_string(),
                t.crown_depth.to_string(),
                t.agb_kg.to_string(),
            ]
        }),
    )?;
    let step = 1.0;
    let n = (p.extent / step) as usize;
    write_csv(
        &truth.join("terrain_samples.csv"),
        &["x", "y", "z"],
        (0..=n).flat_map(|r| {
            (0..=n).map(move |c| {
                let (x, y) = (p.origin.0 + c as f64 * step, p.origin.1 + r as f64 * step);
                vec![x.to_string(), y.to_string(), terrain(p, x, y).to_string()]
            })
        }),
    )?;
    for (k, kinds) in scene.lidar_kinds.iter().enumerate() {
        write_csv(
            &truth.join(format!("lidar_strip_{k}_labels.csv")),
            &["index", "kind"],
            kinds.iter().enumerate().map(|(i, kd)| {
                let s = match kd {
                    SampleKind::Ground => "ground",
                    SampleKind::Canopy => "canopy",
                    SampleKind::Apex => "apex",
                };
                vec![i.to_string(), s.to_string()]
            }),
        )?;
    }
    let table = ModelTable::default();
    let records = scene.tree_records();
    write_csv(
        &truth.join("plot_agb.csv"),
        &["plot_id", "agb_t_ha"],
        scene
            .plots
            .iter()
            .map(|pl| {
                let fp = pl.polygon();
                let d = crate::allometry::plot_agb(&table, &records, &fp, pl.side * pl.side)
                    .map(|a| a.density_t_ha)
                    .map_err(|e| PipelineError::Validation(e.to_string()))?;
                Ok(vec![pl.plot_id.clone(), d.to_string()])
            })
            .collect::<Result<Vec<_>, PipelineError>>()?,
    )?;
    let offsets = serde_json::json!({
        "seed": p.seed,
        "dap_offset": p.dap_offset,
        "strip_offsets": scene.strip_offsets,
        "terrain": {
            "base": p.terrain_base,
            "amplitude": p.terrain_amplitude,
            "wavelength": p.terrain_wavelength,
            "origin": [p.origin.0, p.origin.1],
        },
    });
    let scene_json = truth.join("scene.json");
    fs::write(&scene_json, serde_json::to_string_pretty(&offsets).expect("json") + "\n").map_err(|e| write_err(&scene_json, e))?;
    scene
        .planted_model
        .save(&truth.join("planted_model.toml"))
        .map_err(|e| write_err(&truth, e))?;
    scene
        .planted_agb
        .write_ascii(&truth.join("planted_agb.asc"))
        .map_err(|e| write_err(&truth, e))?;

    let mut cfg = PipelineConfig::default();
    cfg.input.dap = Some(dap.clone());
    cfg.input.lidar = lidar.clone();
    cfg.input.bands = Some(bands.clone());
    cfg.input.trees = Some(trees.clone());
    cfg.input.plots = Some(plots.clone());
    cfg.map.cell_size = p.block_size;
    cfg.output.dir = PathBuf::from("out");
    let config = PathBuf::from("config.toml");
    cfg.save(&dir.join(&config))?;
    Ok(SceneFiles {
        config,
        dap,
        lidar,
        bands,
        trees,
        plots,
        truth_dir: PathBuf::from("truth"),
    })
}
