//! Acceptance suite: one PASS/FAIL line per criterion, then a non-zero exit
//! if any failed.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use canopyfuse::allometry::{ModelTable, SpeciesCode};
use canopyfuse::cloud::{load_cloud, BoundingBox, CloudFormat, GridSpec, Point3D, PointCloud, Raster, SourceKind, VoxelSignal};
use canopyfuse::metrics::{spectral_indices, structural_metrics, HeightSource, Metric, SpectralBands, SpectralOptions};
use canopyfuse::pipeline::{
    artifact, generate_synthetic_scene, run_pipeline, write_scene, PipelineConfig, SampleKind, SceneParams,
    Stage, SyntheticScene,
};
use canopyfuse::registration::{grpc_translation, register_multiscale, GrpcParams, MultiscaleParams, RefineMode};
use canopyfuse::regression::{all_subsets, builtin_model, fit_ols, DesignMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Registration shift recovery on the seed-42 scene.
fn registration_shift(scene: &SyntheticScene) -> Outcome {
    let fixed = scene.lidar_true_frame();
    let want = scene.params.dap_offset.map(|v| -v);
    let params = MultiscaleParams {
        scales: vec![2.0],
        refine: RefineMode::Finest,
        ..Default::default()
    };
    let clock = Instant::now();
    let out = register_multiscale(&fixed, &scene.dap, &params).map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed();
    let r = out[0].result.as_ref().map_err(|e| e.to_string())?;
    let coarse_err: Vec<f64> = (0..3).map(|a| (r.phase.shift[a] - want[a]).abs()).collect();
    let icp = r.refined.as_ref().ok_or("no ICP result")?;
    // Displacement at the scene centre, which folds in any residual rotation.
    let b = scene.dap.bounds().unwrap();
    let c = [(b.min[0] + b.max[0]) / 2.0, (b.min[1] + b.max[1]) / 2.0, (b.min[2] + b.max[2]) / 2.0];
    let moved = icp.transform.apply_xyz(c);
    let fine_err: Vec<f64> = (0..3).map(|a| (moved[a] - c[a] - want[a]).abs()).collect();
    let n = fixed.len() + scene.dap.len();
    check(
        coarse_err.iter().all(|e| *e <= 1.0) && fine_err.iter().all(|e| *e <= 0.1) && elapsed.as_secs_f64() < 60.0 && n <= 1_000_000,
        format!(
            "phase correlation error {:.3?} m (limit 1.0), after ICP {:.3?} m (limit 0.1), {n} points in {:.1?}",
            coarse_err, fine_err, elapsed
        ),
    )
}

/// Exact integer shifts and sub-voxel shifts against the dense correlation oracle.
fn shift_theorem() -> Outcome {
    let n = 32;
    let params = GrpcParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut grpc_time = std::time::Duration::ZERO;
    let mut worst_int: f64 = 0.0;
    for k in 0..100 {
        let s = [rng.random_range(-6..=6i64), rng.random_range(-6..=6i64), rng.random_range(-6..=6i64)];
        // Content confined to the middle so no shift wraps it around.
        let base = common::blobs(k, n, 8, 24);
        let moved = common::roll(&base, n, s);
        let f = VoxelSignal::from_values([0.0; 3], 1.0, [n; 3], base).unwrap();
        let g = VoxelSignal::from_values([0.0; 3], 1.0, [n; 3], moved).unwrap();
        let clock = Instant::now();
        let r = grpc_translation(&f, &g, &params).map_err(|e| e.to_string())?;
        grpc_time += clock.elapsed();
        for a in 0..3 {
            worst_int = worst_int.max((r.shift[a] + s[a] as f64).abs());
        }
        worst_int = worst_int.max(r.residual);
    }
    let mut worst_sub: f64 = 0.0;
    for k in 0..8 {
        let s = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let f = common::band_limited(100 + k, n, 3, [0.0; 3]);
        let g = common::band_limited(100 + k, n, 3, s);
        let clock = Instant::now();
        let r = grpc_translation(&f, &g, &params).map_err(|e| e.to_string())?;
        grpc_time += clock.elapsed();
        let oracle = common::xcorr_peak_bandlimited(&f, &g);
        for a in 0..3 {
            worst_sub = worst_sub.max((r.shift_voxels[a] - oracle[a]).abs());
        }
    }
    check(
        worst_int < 1e-9 && worst_sub <= 0.1 && grpc_time.as_secs_f64() < 30.0,
        format!(
            "100 integer shifts: worst error {worst_int:.1e}; 8 sub-voxel shifts: worst gap to oracle {worst_sub:.4} cells; phase correlation time {grpc_time:.1?}"
        ),
    )
}

/// Ground classification, DTM and CHM against the planted scene.
fn terrain(scene: &SyntheticScene, scene_dir: &Path, out: &Path) -> Outcome {
    let labelled = load_cloud(&out.join(artifact::LIDAR_GROUND), CloudFormat::BinaryRecord, SourceKind::Lidar)
        .map_err(|e| e.to_string())?;
    let kinds: Vec<SampleKind> = scene.lidar_kinds.iter().flatten().copied().collect();
    if kinds.len() != labelled.len() {
        return Err(format!("{} labels for {} points", kinds.len(), labelled.len()));
    }
    let (mut ground, mut ground_hit, mut apex_hit) = (0usize, 0usize, 0usize);
    for (p, k) in labelled.points().iter().zip(&kinds) {
        let g = p.ground == Some(true);
        match k {
            SampleKind::Ground => {
                ground += 1;
                ground_hit += g as usize;
            }
            SampleKind::Apex => apex_hit += g as usize,
            _ => {}
        }
    }
    let share = ground_hit as f64 / ground as f64;

    let dtm = Raster::read_ascii(&out.join(artifact::DTM), "dtm").map_err(|e| e.to_string())?;
    let mut worst_dtm: f64 = 0.0;
    let mut samples = 0;
    let mut rdr = csv::Reader::from_path(scene_dir.join("truth/terrain_samples.csv")).map_err(|e| e.to_string())?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let v: Vec<f64> = rec.iter().map(|s| s.parse().unwrap()).collect();
        if let Some(z) = dtm.bilinear(v[0], v[1]) {
            worst_dtm = worst_dtm.max((z - v[2]).abs());
            samples += 1;
        }
    }

    // Highest CHM cell within 0.3 m of each stem.
    let chm = Raster::read_ascii(&out.join(artifact::CHM), "chm").map_err(|e| e.to_string())?;
    let g = *chm.grid();
    let mut worst_apex: f64 = 0.0;
    for t in &scene.trees {
        let fp = BoundingBox::footprint(t.x - 0.3, t.y - 0.3, t.x + 0.3, t.y + 0.3);
        let (rows, cols) = g.cells_with_centers_in(&fp);
        let top = rows
            .flat_map(|r| cols.clone().map(move |c| (r, c)))
            .filter_map(|(r, c)| chm.get(r, c))
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        worst_apex = worst_apex.max((top - t.height).abs());
    }
    check(
        worst_dtm < 0.25 && share >= 0.95 && apex_hit == 0 && worst_apex <= 0.3,
        format!(
            "DTM max error {worst_dtm:.3} m over {samples} in-hull samples; {:.1}% of ground returns classified ground; {apex_hit} apexes classified ground; worst CHM apex error {worst_apex:.3} m",
            100.0 * share
        ),
    )
}

/// Index and percentile oracles.
fn metric_oracles() -> Outcome {
    let g = GridSpec {
        origin: (0.0, 1.0),
        cell_size: 1.0,
        nrows: 1,
        ncols: 1,
    };
    let fp = BoundingBox::footprint(0.0, 0.0, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut tuples = 0;
    for line in include_str!("oracles/spectral_oracle.csv").lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let bands = SpectralBands::constant(g, [f[0], f[1], f[2], f[3], f[4]]);
        let m = spectral_indices(&bands, &fp, &Metric::SPECTRAL, SpectralOptions::default()).map_err(|e| e.to_string())?;
        for (k, metric) in Metric::SPECTRAL.iter().enumerate() {
            worst = worst.max((m.get(*metric).unwrap() - f[5 + k]).abs());
        }
        tuples += 1;
    }
    let heights = |h: &[f64]| {
        PointCloud::new(
            h.iter().enumerate().map(|(i, &z)| Point3D::new(i as f64 * 0.3, 0.0, z)).collect(),
            SourceKind::Dap,
        )
    };
    let all = BoundingBox::footprint(-1.0, -1.0, 100.0, 100.0);
    let m = structural_metrics(HeightSource::Cloud(&heights(&[1.0, 2.0, 3.0, 4.0, 5.0])), &all, 2.0).map_err(|e| e.to_string())?;
    let pct = [m.get(Metric::H25), m.get(Metric::H50), m.get(Metric::H75), m.get(Metric::H95)];
    let constant = structural_metrics(HeightSource::Cloud(&heights(&[7.5; 12])), &all, 2.0).map_err(|e| e.to_string())?;
    let hcv = constant.get(Metric::Hcv);
    check(
        tuples == 20 && worst < 1e-12 && pct == [Some(2.0), Some(3.0), Some(4.0), Some(4.8)] && hcv == Some(0.0),
        format!("{tuples} band tuples, worst index error {worst:.1e}; h25/h50/h75/h95 {pct:?}; constant-height hcv {hcv:?}"),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Allometric formulas, component additivity and monotonicity.
fn allometry() -> Outcome {
    let t = ModelTable::default();
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for line in include_str!("oracles/allometry_oracle.csv").lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let s: SpeciesCode = f[0].parse().unwrap();
        let h: f64 = f[1].parse().unwrap();
        let num = |i: usize| (!f[i].is_empty()).then(|| f[i].parse::<f64>().unwrap());
        worst = worst.max(rel(t.dbh_from_height(s, h).unwrap(), num(2).unwrap()));
        let a = t.tree_agb(s, h, None).unwrap();
        for (k, (_, got)) in a.parts().into_iter().enumerate() {
            match (got, num(3 + k)) {
                (Some(g), Some(o)) => worst = worst.max(rel(g, o)),
                (None, None) => {}
                _ => return Err(format!("{s} H={h}: component presence differs from the oracle")),
            }
        }
        worst = worst.max(rel(a.total, num(7).unwrap()));
        rows += 1;
    }
    let mut worst_sum: f64 = 0.0;
    let mut monotone = true;
    for s in SpeciesCode::ALL {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=380 {
            let h = 2.0 + i as f64 * 0.1;
            let a = t.tree_agb(s, h, None).unwrap();
            let parts: Vec<f64> = a.parts().iter().filter_map(|p| p.1).collect();
            if !parts.is_empty() {
                worst_sum = worst_sum.max(rel(a.total, parts.iter().sum()));
            }
            monotone &= a.total > prev;
            prev = a.total;
        }
    }
    check(
        rows == 50 && worst < 1e-10 && worst_sum <= 1e-9 && monotone,
        format!("{rows} grid points, worst relative error {worst:.1e}; worst additivity gap {worst_sum:.1e}; monotone in height: {monotone}"),
    )
}

/// Planted-subset recovery, the fit-statistics identity and the built-in model.
fn regression() -> Outcome {
    const CANDIDATES: [&str; 8] = ["ARVI", "DVI", "GNDVI", "NDVI", "OSAVI", "h25", "h75", "hcv"];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 34;
    let cols: Vec<Vec<f64>> = (0..8)
        .map(|j| (0..n).map(|_| rng.random_range(0.0..1.0) * (j as f64 + 1.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|i| 120.0 + 35.0 * cols[4][i] - 80.0 * cols[1][i] + 4.0 * cols[6][i]).collect();
    let names: Vec<String> = CANDIDATES.iter().map(|s| s.to_string()).collect();
    let x = DesignMatrix::new((0..n).map(|i| format!("p{i}")).collect(), names, cols, "agb", y.clone())
        .map_err(|e| e.to_string())?;
    let rep = all_subsets(&x, 3, 20, false).map_err(|e| e.to_string())?;
    let mut chosen = rep.best().ok_or("no fit")?.columns.clone();
    chosen.sort();
    let planted = ["OSAVI", "DVI", "h75"].map(String::from).to_vec();
    let m = fit_ols(&x, &planted).map_err(|e| e.to_string())?;
    let coef_err = m
        .coefficients
        .iter()
        .zip([35.0, -80.0, 4.0])
        .map(|(g, w)| (g - w).abs())
        .fold((m.intercept - 120.0).abs(), f64::max);

    // R² against 1 - n·RMSE²/SST on every ranked fit.
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let identity_gap = rep
        .ranked
        .iter()
        .map(|f| {
            let s = f.stats();
            (s.r_squared - (1.0 - n as f64 * s.rmse * s.rmse / sst)).abs()
        })
        .fold(0.0, f64::max);

    let mv = canopyfuse::metrics::MetricVector::new("cell")
        .with(Metric::Osavi, 0.05)
        .with(Metric::Dvi, 0.01)
        .with(Metric::H75, 20.0);
    let builtin = builtin_model().predict(&mv).map_err(|e| e.to_string())?.value;
    check(
        chosen == ["DVI", "OSAVI", "h75"] && coef_err < 1e-8 && identity_gap < 1e-9 && (builtin - 68.38).abs() < 1e-9,
        format!(
            "selected {chosen:?}; worst coefficient error {coef_err:.1e}; identity gap {identity_gap:.1e} over {} fits; built-in model {builtin:.9} t/ha",
            rep.ranked.len()
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Second full run and the planted-model map; the first run is passed in.
fn end_to_end(cfg: &PipelineConfig, scene_dir: &Path, first: &BTreeMap<PathBuf, Vec<u8>>, first_time: f64) -> Outcome {
    let out = cfg.out_dir();
    fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
    let clock = Instant::now();
    run_pipeline(cfg, &Stage::ALL).map_err(|e| e.to_string())?;
    let second_time = clock.elapsed().as_secs_f64();
    let second = snapshot(&out);
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();

    let mut planted = cfg.clone();
    planted.map.model = Some(scene_dir.join("truth/planted_model.toml"));
    run_pipeline(&planted, &[Stage::Map]).map_err(|e| e.to_string())?;
    let map = Raster::read_ascii(&out.join(artifact::AGB_MAP), "agb").map_err(|e| e.to_string())?;
    let truth = Raster::read_ascii(&scene_dir.join("truth/planted_agb.asc"), "agb").map_err(|e| e.to_string())?;
    if map.grid() != truth.grid() {
        return Err(format!("map grid {:?} differs from the planted grid {:?}", map.grid(), truth.grid()));
    }
    let mut worst: f64 = 0.0;
    let mut defined = 0;
    for (m, t) in map.values().iter().zip(truth.values()) {
        if !m.is_nan() && !t.is_nan() {
            worst = worst.max((m - t).abs());
            defined += 1;
        }
    }
    check(
        differing.is_empty() && defined > 0 && worst <= 1e-6 && first_time.max(second_time) < 300.0,
        format!(
            "{} artifacts, {} differ between runs; planted map worst error {worst:.1e} t/ha over {defined} cells; runs took {first_time:.1} s and {second_time:.1} s",
            first.len(),
            differing.len()
        ),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let clock = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = clock.elapsed().as_secs_f64();
    match outcome {
        Ok(d) => {
            println!("criterion {n} ({name}): PASS [{secs:.1} s] {d}");
            true
        }
        Err(d) => {
            println!("criterion {n} ({name}): FAIL [{secs:.1} s] {d}");
            false
        }
    }
}

fn main() {
    let scene = generate_synthetic_scene(&SceneParams::default()).expect("scene");
    let dir = tempfile::tempdir().expect("tempdir");
    let files = write_scene(&scene, dir.path()).expect("write scene");
    let cfg = PipelineConfig::load(&dir.path().join(&files.config)).expect("config");
    let clock = Instant::now();
    let first_run = run_pipeline(&cfg, &Stage::ALL);
    let first_time = clock.elapsed().as_secs_f64();
    let first = first_run.as_ref().ok().map(|_| snapshot(&cfg.out_dir()));
    let pipeline_failed = |e: &canopyfuse::pipeline::PipelineError| Err(format!("full run failed: {e}"));

    let mut ok = true;
    ok &= run(1, "registration shift recovery", || registration_shift(&scene));
    ok &= run(2, "shift theorem", shift_theorem);
    ok &= run(3, "terrain", || match &first_run {
        Ok(_) => terrain(&scene, dir.path(), &cfg.out_dir()),
        Err(e) => pipeline_failed(e),
    });
    ok &= run(4, "metric oracles", metric_oracles);
    ok &= run(5, "allometry oracles", allometry);
    ok &= run(6, "regression recovery", regression);
    ok &= run(7, "end-to-end determinism", || match (&first_run, &first) {
        (Ok(_), Some(first)) => end_to_end(&cfg, dir.path(), first, first_time),
        (Err(e), _) => pipeline_failed(e),
        _ => unreachable!(),
    });
    if !ok {
        std::process::exit(1);
    }
}
