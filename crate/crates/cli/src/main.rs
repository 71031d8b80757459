use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use canopyfuse::allometry::{plot_agb, read_trees, write_plot_summary, write_tree_agb, ModelTable};
use canopyfuse::cloud::{load_cloud, save_cloud, CloudFormat, PointCloud, Raster, SourceKind};
use canopyfuse::metrics::{
    metric_table, spectral_indices, structural_metrics, HeightSource, Metric, MetricVector, MetricsError, NumericTable,
    SpectralBands,
};
use canopyfuse::pipeline::{
    current_timestamp, emit_figure_data, generate_synthetic_scene, map_agb_with, read_plots, run_pipeline,
    scale_residuals, write_scene, HeightSetting, MapOptions, PipelineConfig, PipelineError, RefineSetting, SceneParams,
    Stage,
};
use canopyfuse::registration::{apply_transform, register_multiscale, write_transform};
use canopyfuse::regression::{all_subsets, write_ranking_csv, DesignMatrix, LinearModel, Provenance, DEFAULT_MAX_CANDIDATES};
use canopyfuse::terrain::{build_chm_on, build_dsm, build_dtm, filter_ground, normalize_cloud};

#[derive(Parser)]
#[command(name = "canopyfuse", version, about = "DAP/LiDAR fusion and plot-level forest biomass mapping")]
struct Cli {
    /// Run configuration (TOML). Flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized steps (RANSAC, synthetic scenes).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register DAP to LiDAR. With --fixed/--moving works on files; otherwise
    /// runs the strip and registration stages of the configured run.
    Register(RegisterArgs),
    /// Ground filtering, DTM, height normalization and CHM.
    Terrain(TerrainArgs),
    /// Plot-level spectral and structural metrics.
    Metrics(MetricsArgs),
    /// Tree and plot above-ground biomass from tree records.
    TreeAgb(TreeAgbArgs),
    /// All-subsets model fitting.
    Fit(FitArgs),
    /// Wall-to-wall biomass map.
    Map(MapArgs),
    /// Run the workflow, or selected stages of it.
    Run(RunArgs),
    /// Write a synthetic scene with known truth and a ready config.
    Synth(SynthArgs),
    /// Plot-ready CSV tables from the artifacts of a run.
    EmitFigures(EmitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Refine {
    None,
    Finest,
    All,
}

impl From<Refine> for RefineSetting {
    fn from(r: Refine) -> Self {
        match r {
            Refine::None => RefineSetting::None,
            Refine::Finest => RefineSetting::Finest,
            Refine::All => RefineSetting::All,
        }
    }
}

#[derive(Args)]
struct RegisterArgs {
    /// Reference cloud (LiDAR).
    #[arg(long, requires = "moving")]
    fixed: Option<PathBuf>,
    /// Cloud to move (DAP).
    #[arg(long, requires = "fixed")]
    moving: Option<PathBuf>,
    /// Voxel sizes, meters.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// ICP refinement; bare flag means the finest scale.
    #[arg(long, num_args = 0..=1, default_missing_value = "finest")]
    refine: Option<Refine>,
    /// Transform output (file mode).
    #[arg(long, default_value = "transform.txt")]
    out: PathBuf,
    /// Per-scale report CSV (file mode).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the moved cloud (file mode).
    #[arg(long)]
    registered: Option<PathBuf>,
}

#[derive(Args)]
struct TerrainArgs {
    #[command(subcommand)]
    step: Option<TerrainStep>,
    /// Also write the absolute DSM (stage mode).
    #[arg(long)]
    emit_dsm: bool,
}

#[derive(Subcommand)]
enum TerrainStep {
    /// Label ground points.
    FilterGround {
        #[arg(long)]
        input: PathBuf,
        /// Labelled cloud.
        #[arg(long)]
        out: PathBuf,
        /// Ground points only.
        #[arg(long)]
        ground_out: Option<PathBuf>,
        #[arg(long)]
        seed_cell: Option<f64>,
        #[arg(long)]
        max_distance: Option<f64>,
        #[arg(long)]
        max_angle: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Terrain raster from ground points (a labelled cloud keeps only its ground).
    Dtm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cell: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Heights above terrain.
    Normalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dtm: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Canopy height model from a normalized cloud.
    Chm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cell: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the absolute DSM from the raw cloud given by --raw.
        #[arg(long, requires = "raw")]
        emit_dsm: bool,
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, default_value = "dsm.asc")]
        dsm_out: PathBuf,
    },
}

#[derive(Args)]
struct MetricsArgs {
    /// Band manifest.
    #[arg(long)]
    bands: Option<PathBuf>,
    /// Structural metrics from a CHM raster.
    #[arg(long, conflicts_with = "cloud")]
    chm: Option<PathBuf>,
    /// Structural metrics from a normalized cloud.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Metric table (file mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Index every pixel, then average.
    #[arg(long)]
    per_pixel: bool,
    /// Ratio RGRI and three-band NormG.
    #[arg(long)]
    corrected_indices: bool,
    #[arg(long)]
    cover_threshold: Option<f64>,
}

#[derive(Args)]
struct TreeAgbArgs {
    #[arg(long)]
    trees: Option<PathBuf>,
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Coefficient overrides (TOML).
    #[arg(long)]
    overrides: Option<PathBuf>,
    /// Plot summary (file mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-tree components (file mode).
    #[arg(long)]
    tree_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Table with metric columns and the response (file mode).
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<String>>,
    #[arg(long)]
    max_size: Option<usize>,
    /// Add leave-one-out statistics.
    #[arg(long)]
    loocv: bool,
    /// Best model (file mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best-per-size ranking CSV (file mode).
    #[arg(long)]
    ranking: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    chm: Option<PathBuf>,
    #[arg(long)]
    bands: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Map cell, meters.
    #[arg(long)]
    cell: Option<f64>,
    /// Structural metrics from this normalized cloud instead of the CHM.
    #[arg(long)]
    map_from_cloud: Option<PathBuf>,
    /// Biomass raster (file mode).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated stage names; default all.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<String>>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    plots: Option<usize>,
}

#[derive(Args)]
struct EmitArgs {
    /// Figure directory; default <out-dir>/figures.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig {
            base_dir: std::env::current_dir().map_err(|e| PipelineError::Io(e.to_string()))?,
            ..Default::default()
        },
    };
    if let Some(d) = &cli.out_dir {
        let cwd = std::env::current_dir().map_err(|e| PipelineError::Io(e.to_string()))?;
        cfg.output.dir = cwd.join(d);
    }
    if let Some(s) = cli.seed {
        cfg.registration.seed = s;
    }
    Ok(cfg)
}

fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> Result<(), PipelineError> {
    let report = run_pipeline(cfg, stages)?;
    for s in &report.stages {
        println!("{}: {}", s.stage, s.artifacts.join(", "));
    }
    Ok(())
}

fn load(path: &Path, source: SourceKind) -> Result<PointCloud, PipelineError> {
    Ok(load_cloud(path, CloudFormat::from_path(path), source)?)
}

fn save(path: &Path, cloud: &PointCloud) -> Result<(), PipelineError> {
    Ok(save_cloud(path, cloud, CloudFormat::from_path(path))?)
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Register(a) => {
            if let Some(s) = &a.scales {
                cfg.registration.scales = s.clone();
            }
            match (&a.fixed, &a.moving) {
                (Some(f), Some(m)) => {
                    cfg.registration.refine = a.refine.map_or(RefineSetting::None, Into::into);
                    register_files(&cfg, f, m, a)
                }
                _ => {
                    if let Some(r) = a.refine {
                        cfg.registration.refine = r.into();
                    }
                    run_stages(&cfg, &[Stage::Strips, Stage::Register])
                }
            }
        }
        Command::Terrain(t) => match &t.step {
            None => {
                cfg.terrain.emit_dsm |= t.emit_dsm;
                run_stages(&cfg, &[Stage::Terrain])
            }
            Some(step) => terrain_step(&mut cfg, step),
        },
        Command::Metrics(a) => {
            cfg.metrics.per_pixel |= a.per_pixel;
            cfg.metrics.corrected |= a.corrected_indices;
            if let Some(c) = a.cover_threshold {
                cfg.metrics.cover_threshold = c;
            }
            match &a.out {
                Some(out) => metrics_files(&cfg, a, out),
                None => {
                    if a.chm.is_some() {
                        cfg.metrics.plot_heights = HeightSetting::Chm;
                    }
                    override_path(&mut cfg.input.bands, &a.bands);
                    override_path(&mut cfg.input.plots, &a.plots);
                    run_stages(&cfg, &[Stage::Metrics])
                }
            }
        }
        Command::TreeAgb(a) => {
            if let Some(o) = &a.overrides {
                cfg.allometry.overrides = Some(abs(o)?);
            }
            match &a.out {
                Some(out) => tree_agb_files(&cfg, a, out),
                None => {
                    override_path(&mut cfg.input.trees, &a.trees);
                    override_path(&mut cfg.input.plots, &a.plots);
                    run_stages(&cfg, &[Stage::TreeAgb])
                }
            }
        }
        Command::Fit(a) => {
            let r = &mut cfg.regression;
            if let Some(v) = &a.response {
                r.response = v.clone();
            }
            if let Some(v) = &a.candidates {
                r.candidates = v.clone();
            }
            if let Some(v) = a.max_size {
                r.max_size = v;
            }
            r.loocv |= a.loocv;
            match (&a.metrics, &a.out) {
                (Some(m), Some(out)) => fit_files(&cfg, m, out, a.ranking.as_deref()),
                (Some(_), None) | (None, Some(_)) => {
                    Err(PipelineError::Validation("fit on files needs both --metrics and --out".into()))
                }
                (None, None) => run_stages(&cfg, &[Stage::Fit]),
            }
        }
        Command::Map(a) => {
            if let Some(c) = a.cell {
                cfg.map.cell_size = c;
            }
            match &a.out {
                Some(out) => map_files(&cfg, a, out),
                None => {
                    if let Some(m) = &a.model {
                        cfg.map.model = Some(abs(m)?);
                    }
                    cfg.map.from_cloud |= a.map_from_cloud.is_some();
                    override_path(&mut cfg.input.bands, &a.bands);
                    run_stages(&cfg, &[Stage::Map])
                }
            }
        }
        Command::Run(a) => {
            let stages = match &a.stages {
                Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<Stage>, _>>()?,
                None => Stage::ALL.to_vec(),
            };
            run_stages(&cfg, &stages)
        }
        Command::Synth(a) => {
            let mut p = SceneParams::default();
            if let Some(s) = cli.seed {
                p.seed = s;
            }
            if let Some(v) = a.extent {
                p.extent = v;
            }
            if let Some(v) = a.trees {
                p.n_trees = v;
            }
            if let Some(v) = a.plots {
                p.n_plots = v;
            }
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("synthetic_scene"));
            let scene = generate_synthetic_scene(&p)?;
            let files = write_scene(&scene, &dir)?;
            println!("scene written to {}; run with --config {}", dir.display(), dir.join(&files.config).display());
            Ok(())
        }
        Command::EmitFigures(a) => {
            let out = cfg.out_dir();
            let fig = a.out.clone().unwrap_or_else(|| out.join("figures"));
            for f in emit_figure_data(&out, &fig)? {
                println!("{}", fig.join(f).display());
            }
            Ok(())
        }
    }
}

fn abs(p: &Path) -> Result<PathBuf, PipelineError> {
    std::path::absolute(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))
}

fn override_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = Some(std::path::absolute(p).unwrap_or_else(|_| p.clone()));
    }
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, PipelineError> {
    p.as_deref()
        .ok_or_else(|| PipelineError::Validation(format!("--{flag} is required with --out")))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn register_files(cfg: &PipelineConfig, fixed: &Path, moving: &Path, a: &RegisterArgs) -> Result<(), PipelineError> {
    cfg.validate_params()?;
    let rc = &cfg.registration;
    let f = load(fixed, SourceKind::Lidar)?;
    let m = load(moving, SourceKind::Dap)?;
    let params = rc.multiscale(&rc.scales, rc.refine.into());
    let outcomes = register_multiscale(&f, &m, &params)?;
    let (residuals, best) = scale_residuals(&f, &m, &outcomes, params.icp_params().max_pair_dist);
    let Some(best) = best else {
        let first = outcomes.into_iter().find_map(|o| o.result.err());
        return Err(first.map_or(PipelineError::Failed("no scale registered".into()), Into::into));
    };
    let chosen = outcomes[best].result.as_ref().expect("selected scale registered");
    let t = *chosen.best();
    write_transform(&a.out, &t, &format!("{} onto {}, {} m scale", moving.display(), fixed.display(), outcomes[best].scale))?;
    println!("scale {} m: translation {:?}", outcomes[best].scale, t.translation_vector());
    if let Some(path) = &a.report {
        let mut w = csv::Writer::from_path(path).map_err(csv_io(path))?;
        w.write_record([
            "scale", "status", "shift_x", "shift_y", "shift_z", "inlier_fraction", "phase_residual", "tx", "ty", "tz",
            "rotation_angle", "residual_sum", "selected",
        ])
        .map_err(csv_io(path))?;
        for (i, (o, res)) in outcomes.iter().zip(&residuals).enumerate() {
            let mut rec = vec![o.scale.to_string()];
            match &o.result {
                Ok(r) => {
                    let s = r.coarse.translation_vector();
                    let t = r.best().translation_vector();
                    rec.push("ok".into());
                    rec.extend(s.iter().map(|v| v.to_string()));
                    rec.push(r.phase.inlier_fraction.to_string());
                    rec.push(r.phase.residual.to_string());
                    rec.extend(t.iter().map(|v| v.to_string()));
                    rec.push(r.best().rotation_angle().to_string());
                    rec.push(res.map_or(String::new(), |v| v.to_string()));
                }
                Err(e) => {
                    rec.push(e.to_string());
                    rec.extend(std::iter::repeat_n(String::new(), 10));
                }
            }
            rec.push((i == best).to_string());
            w.write_record(&rec).map_err(csv_io(path))?;
        }
        w.flush().map_err(|e| PipelineError::Io(e.to_string()))?;
    }
    if let Some(path) = &a.registered {
        save(path, &apply_transform(&m, &t))?;
    }
    Ok(())
}

fn terrain_step(cfg: &mut PipelineConfig, step: &TerrainStep) -> Result<(), PipelineError> {
    match step {
        TerrainStep::FilterGround { input, out, ground_out, seed_cell, max_distance, max_angle, max_iterations } => {
            let t = &mut cfg.terrain;
            t.seed_cell_size = seed_cell.unwrap_or(t.seed_cell_size);
            t.max_tin_distance = max_distance.unwrap_or(t.max_tin_distance);
            t.max_tin_angle = max_angle.unwrap_or(t.max_tin_angle);
            t.max_iterations = max_iterations.unwrap_or(t.max_iterations);
            let cloud = load(input, SourceKind::Lidar)?;
            let g = filter_ground(&cloud, &t.ground_params())?;
            save(out, &g.labelled(&cloud))?;
            if let Some(p) = ground_out {
                save(p, &g.ground)?;
            }
            println!("{} of {} points are ground", g.ground.len(), cloud.len());
        }
        TerrainStep::Dtm { input, cell, out } => {
            let cloud = load(input, SourceKind::Lidar)?;
            let labelled = cloud.points().iter().any(|p| p.ground.is_some());
            let ground = if labelled {
                cloud.derive(cloud.points().iter().filter(|p| p.ground == Some(true)).copied().collect())
            } else {
                cloud
            };
            build_dtm(&ground, cell.unwrap_or(cfg.terrain.dtm_cell))?.write_ascii(out)?;
        }
        TerrainStep::Normalize { input, dtm, out } => {
            let cloud = load(input, SourceKind::Dap)?;
            let dtm = Raster::read_ascii(dtm, "dtm")?;
            let n = normalize_cloud(&cloud, &dtm)?;
            if n.dropped > 0 {
                warn!("{} points over nodata terrain dropped", n.dropped);
            }
            save(out, &n.cloud)?;
        }
        TerrainStep::Chm { input, cell, out, emit_dsm, raw, dsm_out } => {
            let cloud = load(input, SourceKind::Dap)?;
            let bounds = cloud
                .bounds()
                .ok_or_else(|| PipelineError::Validation(format!("{} is empty", input.display())))?;
            let grid = canopyfuse::cloud::GridSpec::covering(&bounds, cell.unwrap_or(cfg.terrain.chm_cell));
            let chm = build_chm_on(&cloud, grid)?;
            chm.chm.write_ascii(out)?;
            info!("CHM: {} occupied cells", chm.occupied_cells);
            if *emit_dsm {
                let raw = load(raw.as_deref().expect("clap requires --raw"), SourceKind::Dap)?;
                build_dsm(&raw, grid)?.write_ascii(dsm_out)?;
            }
        }
    }
    Ok(())
}

fn metrics_files(cfg: &PipelineConfig, a: &MetricsArgs, out: &Path) -> Result<(), PipelineError> {
    let bands = SpectralBands::from_raster(&Raster::read_multiband(need(&a.bands, "bands")?)?);
    let plots = read_plots(need(&a.plots, "plots")?)?;
    let cloud;
    let chm;
    let heights = match (&a.chm, &a.cloud) {
        (Some(c), _) => {
            chm = Raster::read_ascii(c, "chm")?;
            Some(HeightSource::Chm(&chm))
        }
        (None, Some(c)) => {
            cloud = load(c, SourceKind::Dap)?;
            Some(HeightSource::Cloud(&cloud))
        }
        (None, None) => None,
    };
    let opts = cfg.metrics.spectral_options();
    let mut rows = Vec::new();
    for p in &plots {
        let fp = p.footprint();
        let mut mv = MetricVector::new(p.plot_id.clone());
        match spectral_indices(&bands, &fp, &Metric::SPECTRAL, opts) {
            Ok(v) => mv.merge(&v),
            Err(MetricsError::EmptyFootprint(m)) => warn!("plot {}: {m}", p.plot_id),
            Err(e) => return Err(e.into()),
        }
        if let Some(h) = heights {
            match structural_metrics(h, &fp, cfg.metrics.cover_threshold) {
                Ok(v) => mv.merge(&v),
                Err(MetricsError::EmptyFootprint(m)) => warn!("plot {}: {m}", p.plot_id),
                Err(e) => return Err(e.into()),
            }
        }
        rows.push(mv);
    }
    metric_table(&rows).write_csv(out)?;
    Ok(())
}

fn tree_agb_files(cfg: &PipelineConfig, a: &TreeAgbArgs, out: &Path) -> Result<(), PipelineError> {
    let table = match &cfg.allometry.overrides {
        Some(p) => ModelTable::with_overrides(p)?,
        None => ModelTable::default(),
    };
    let trees = read_trees(need(&a.trees, "trees")?)?;
    let plots = read_plots(need(&a.plots, "plots")?)?;
    let agb = trees
        .iter()
        .map(|t| table.tree_agb(t.species, t.height, t.dbh))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = &a.tree_out {
        write_tree_agb(p, &table, &trees, &agb)?;
    }
    let mut summary = Vec::new();
    for p in &plots {
        let r = plot_agb(&table, &trees, &p.polygon(), p.area())?;
        summary.push((p.plot_id.clone(), r.trees.len(), r.density_t_ha));
    }
    write_plot_summary(out, &summary)?;
    Ok(())
}

fn fit_files(cfg: &PipelineConfig, metrics: &Path, out: &Path, ranking: Option<&Path>) -> Result<(), PipelineError> {
    let rc = &cfg.regression;
    let table = NumericTable::read_csv(metrics)?;
    let x = DesignMatrix::from_table(&table, &rc.response, &rc.candidates)?;
    let report = all_subsets(&x, rc.max_size, DEFAULT_MAX_CANDIDATES, rc.loocv)?;
    if let Some(p) = ranking {
        write_ranking_csv(p, &report, false)?;
    }
    let best = report
        .best()
        .ok_or_else(|| PipelineError::Failed("no predictor subset could be fitted".into()))?;
    let mut model: LinearModel = best.model.clone();
    model.provenance = Some(Provenance {
        source: metrics.display().to_string(),
        data_sha256: Some(x.content_hash()),
        created: current_timestamp(),
    });
    model.save(out)?;
    let s = best.stats();
    println!("{}: R2 {:.4}, RMSE {:.4}", best.columns.join(" + "), s.r_squared, s.rmse);
    Ok(())
}

fn map_files(cfg: &PipelineConfig, a: &MapArgs, out: &Path) -> Result<(), PipelineError> {
    let chm = Raster::read_ascii(need(&a.chm, "chm")?, "chm")?;
    let bands = SpectralBands::from_raster(&Raster::read_multiband(need(&a.bands, "bands")?)?);
    let model = LinearModel::load(need(&a.model, "model")?)?;
    let cloud;
    let heights = match &a.map_from_cloud {
        Some(p) => {
            cloud = load(p, SourceKind::Dap)?;
            HeightSource::Cloud(&cloud)
        }
        None => HeightSource::Chm(&chm),
    };
    let opts = MapOptions {
        cell_size: cfg.map.cell_size,
        cover_threshold: cfg.metrics.cover_threshold,
        spectral: cfg.metrics.spectral_options(),
        min_defined_fraction: cfg.map.min_defined_fraction,
    };
    let m = map_agb_with(&chm, heights, &bands, &model, &opts)?;
    m.raster.write_ascii(out)?;
    println!("{} of {} cells defined, {} clamped", m.defined_cells, m.raster.grid().len(), m.clamped_cells);
    Ok(())
}
