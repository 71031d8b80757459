use canopyfuse::cloud::{BoundingBox, GridSpec, Point3D, PointCloud, Raster, SourceKind};
use canopyfuse::terrain::{
    build_chm, build_dtm, filter_ground, normalize_cloud, GroundFilterParams, TriangulatedSurface,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn terrain(x: f64, y: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / 200.0;
    2500.0 + 10.0 * (k * x).sin() * (k * y).cos()
}

fn random_sites(seed: u64, n: usize) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(-1.0..1.0)])
        .collect()
}

/// Area each site loses to a new site at q, measured on a fine sample grid.
fn stolen_area_weights(sites: &[[f64; 3]], q: (f64, f64), lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut stolen = vec![0.0; sites.len()];
    for i in 0..n {
        for j in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            let y = lo + (j as f64 + 0.5) * h;
            let dq = (x - q.0).powi(2) + (y - q.1).powi(2);
            let (best, d) = sites
                .iter()
                .enumerate()
                .map(|(k, s)| (k, (x - s[0]).powi(2) + (y - s[1]).powi(2)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if dq < d {
                assert!(i > 0 && j > 0 && i < n - 1 && j < n - 1, "stolen region touches the sample window");
                stolen[best] += 1.0;
            }
        }
    }
    let total: f64 = stolen.iter().sum();
    stolen.iter().map(|s| s / total).collect()
}

#[test]
fn sibson_weights_match_voronoi_area_stealing() {
    let sites = random_sites(17, 12);
    let tin = TriangulatedSurface::new(&sites).unwrap();
    for q in [(5.0, 5.0), (4.1, 6.3), (6.2, 3.7)] {
        if tin.interpolate_linear(q.0, q.1).is_none() {
            continue;
        }
        let oracle = stolen_area_weights(&sites, q, -15.0, 25.0, 1600);
        let w = tin.sibson_weights(q.0, q.1);
        let mut got = vec![0.0; sites.len()];
        for (i, v) in w {
            got[i] = v;
        }
        for (k, (g, o)) in got.iter().zip(&oracle).enumerate() {
            assert!((g - o).abs() < 0.01, "site {k} at {q:?}: {g} vs {o}");
        }
    }
}

#[test]
fn affine_surface_reproduced_by_dtm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Point3D> = (0..500)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..40.0), rng.random_range(0.0..40.0));
            Point3D::new(x, y, 2.0 * x + 3.0)
        })
        .collect();
    let dtm = build_dtm(&PointCloud::new(pts, SourceKind::Lidar), 0.5).unwrap();
    let g = *dtm.grid();
    let mut defined = 0;
    for r in 0..g.nrows {
        for c in 0..g.ncols {
            if let Some(v) = dtm.get(r, c) {
                let (x, _) = g.cell_center(r, c);
                assert!((v - (2.0 * x + 3.0)).abs() < 1e-9);
                defined += 1;
            }
        }
    }
    assert!(defined > 5000);
}

#[test]
fn sinusoid_dtm_error_below_quarter_meter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Point3D> = (0..150 * 150)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..150.0), rng.random_range(0.0..150.0));
            Point3D::new(x, y, terrain(x, y))
        })
        .collect();
    let dtm = build_dtm(&PointCloud::new(pts, SourceKind::Lidar), 0.5).unwrap();
    let g = *dtm.grid();
    let mut worst: f64 = 0.0;
    for r in 0..g.nrows {
        for c in 0..g.ncols {
            if let Some(v) = dtm.get(r, c) {
                let (x, y) = g.cell_center(r, c);
                worst = worst.max((v - terrain(x, y)).abs());
            }
        }
    }
    assert!(worst < 0.25, "max error {worst}");
}

/// Sinusoid ground at 1 pt/m^2 plus flat-topped 15 m cylinders.
/// Returns the cloud and a label per point: 0 ground, 1 tree top, 2 tree side.
fn cylinder_scene(seed: u64) -> (PointCloud, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 150.0;
    let mut trees: Vec<(f64, f64)> = Vec::new();
    while trees.len() < 40 {
        let c = (rng.random_range(10.0..side - 10.0), rng.random_range(10.0..side - 10.0));
        if trees.iter().all(|t| (t.0 - c.0).hypot(t.1 - c.1) > 9.0) {
            trees.push(c);
        }
    }
    let radius = 3.0;
    let inside = |x: f64, y: f64| trees.iter().find(|t| (t.0 - x).hypot(t.1 - y) <= radius).copied();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..(side * side) as usize {
        let (x, y) = (rng.random_range(0.0..side), rng.random_range(0.0..side));
        match inside(x, y) {
            Some(t) => {
                pts.push(Point3D::new(x, y, terrain(t.0, t.1) + 15.0));
                labels.push(1);
            }
            None => {
                pts.push(Point3D::new(x, y, terrain(x, y)));
                labels.push(0);
            }
        }
    }
    for t in &trees {
        for k in 0..30 {
            let a = k as f64 / 30.0 * std::f64::consts::TAU;
            let z = rng.random_range(0.5..15.0);
            pts.push(Point3D::new(t.0 + radius * a.cos(), t.1 + radius * a.sin(), terrain(t.0, t.1) + z));
            labels.push(2);
        }
    }
    (PointCloud::new(pts, SourceKind::Lidar), labels)
}

#[test]
fn ground_filter_separates_cylinder_trees() {
    let (cloud, labels) = cylinder_scene(11);
    let out = filter_ground(&cloud, &GroundFilterParams::default()).unwrap();
    let ground_total = labels.iter().filter(|l| **l == 0).count();
    let ground_hit = labels.iter().zip(&out.flags).filter(|(l, f)| **l == 0 && **f).count();
    let tops_hit = labels.iter().zip(&out.flags).filter(|(l, f)| **l == 1 && **f).count();
    let frac = ground_hit as f64 / ground_total as f64;
    assert!(frac >= 0.95, "ground recall {frac}");
    assert_eq!(tops_hit, 0);
    assert_eq!(out.ground.len(), out.flags.iter().filter(|f| **f).count());
}

#[test]
fn flat_terrain_all_ground_and_too_few_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Point3D> = (0..2000)
        .map(|_| Point3D::new(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0), 5.0))
        .collect();
    let out = filter_ground(&PointCloud::new(pts, SourceKind::Lidar), &GroundFilterParams::default()).unwrap();
    assert!(out.flags.iter().all(|f| *f));
    let two = PointCloud::new(vec![Point3D::new(0.0, 0.0, 0.0), Point3D::new(50.0, 50.0, 0.0)], SourceKind::Lidar);
    assert!(filter_ground(&two, &GroundFilterParams::default()).is_err());
}

fn small_rough_scene(seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..1500)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0));
            let bump = if rng.random_bool(0.25) { rng.random_range(0.0..8.0) } else { rng.random_range(0.0..0.3) };
            Point3D::new(x, y, terrain(x, y) + bump)
        })
        .collect();
    PointCloud::new(pts, SourceKind::Lidar)
}

fn threshold_pair(cloud: &PointCloud, iters: usize, d: f64, dd: f64, a: f64, da: f64) -> (Vec<bool>, Vec<bool>) {
    let base = GroundFilterParams {
        seed_cell_size: 15.0,
        max_tin_distance: d,
        max_tin_angle: a,
        max_iterations: iters,
    };
    let loose = GroundFilterParams {
        max_tin_distance: d + dd,
        max_tin_angle: (a + da).min(89.0),
        ..base
    };
    (filter_ground(cloud, &base).unwrap().flags, filter_ground(cloud, &loose).unwrap().flags)
}

// Re-triangulating after each batch moves facets, so a point accepted under
// tight thresholds can be rejected once extra points densify the TIN.
#[test]
#[ignore = "full densification is not monotone in its thresholds; fails for seed 69"]
fn full_run_ground_set_grows_with_thresholds() {
    let cloud = small_rough_scene(69);
    let (tight, wide) = threshold_pair(&cloud, 20, 0.8365166303060262, 1.2306917149184906, 5.0, 0.0);
    let lost = tight.iter().zip(&wide).filter(|(t, w)| **t && !**w).count();
    assert_eq!(lost, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_pass_ground_set_grows_with_thresholds(
        seed in 0u64..1000,
        d in 0.2f64..1.5,
        dd in 0.0f64..1.5,
        a in 5.0f64..30.0,
        da in 0.0f64..30.0,
    ) {
        let cloud = small_rough_scene(seed);
        let (tight, wide) = threshold_pair(&cloud, 1, d, dd, a, da);
        for (i, (t, w)) in tight.iter().zip(&wide).enumerate() {
            prop_assert!(!*t || *w, "point {} ground under tight thresholds only", i);
        }
    }

    #[test]
    fn sibson_partition_of_unity(seed in 0u64..10_000, qx in 0.0f64..10.0, qy in 0.0f64..10.0) {
        let sites = random_sites(seed, 30);
        let tin = TriangulatedSurface::new(&sites).unwrap();
        let w = tin.sibson_weights(qx, qy);
        if !w.is_empty() {
            let sum: f64 = w.iter().map(|(_, v)| v).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum {}", sum);
            prop_assert!(w.iter().all(|(_, v)| *v >= -1e-12));
            let cx: f64 = w.iter().map(|(i, v)| v * sites[*i][0]).sum();
            let cy: f64 = w.iter().map(|(i, v)| v * sites[*i][1]).sum();
            prop_assert!((cx - qx).abs() < 1e-7 && (cy - qy).abs() < 1e-7);
        }
    }

    #[test]
    fn chm_non_negative_and_filled_in_hull(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3D> = (0..400)
            .map(|_| Point3D::new(rng.random_range(0.0..8.0), rng.random_range(0.0..8.0), rng.random_range(-2.0..20.0)))
            .collect();
        let out = build_chm(&PointCloud::new(pts, SourceKind::Dap), 0.1).unwrap();
        let g = *out.chm.grid();
        let occupied: Vec<[f64; 3]> = (0..g.len())
            .filter(|i| !out.chm.values()[*i].is_nan())
            .map(|i| { let (x, y) = g.cell_center(i / g.ncols, i % g.ncols); [x, y, 0.0] })
            .collect();
        prop_assert!(out.chm.values().iter().all(|v| v.is_nan() || *v >= 0.0));
        let hull = TriangulatedSurface::new(&occupied).unwrap();
        for r in (0..g.nrows).step_by(3) {
            for c in (0..g.ncols).step_by(3) {
                let (x, y) = g.cell_center(r, c);
                if hull.interpolate_linear(x, y).is_some() {
                    prop_assert!(out.chm.get(r, c).is_some(), "hole at {},{}", r, c);
                }
            }
        }
    }

    #[test]
    fn normalization_conserves_points(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec { origin: (0.0, 10.0), cell_size: 1.0, nrows: 10, ncols: 10 };
        let vals: Vec<f64> = (0..100).map(|i| if rng.random_bool(0.2) || i % 17 == 0 { f64::NAN } else { 10.0 }).collect();
        let dtm = Raster::from_band(grid, "dtm", vals).unwrap();
        let pts: Vec<Point3D> = (0..300)
            .map(|_| Point3D::new(rng.random_range(-2.0..12.0), rng.random_range(-2.0..12.0), rng.random_range(5.0..30.0)))
            .collect();
        let n = pts.len();
        if let Ok(out) = normalize_cloud(&PointCloud::new(pts, SourceKind::Dap), &dtm) {
            prop_assert_eq!(out.cloud.len() + out.dropped, n);
            prop_assert!(out.cloud.points().iter().all(|p| p.z >= 0.0));
        }
    }
}

#[test]
fn normalize_flat_dtm_examples() {
    let grid = GridSpec::covering(&BoundingBox::footprint(0.0, 0.0, 10.0, 10.0), 1.0);
    let dtm = Raster::from_band(grid, "dtm", vec![10.0; grid.len()]).unwrap();
    let c = PointCloud::new(vec![Point3D::new(5.2, 5.7, 25.0), Point3D::new(3.3, 1.1, 8.0)], SourceKind::Dap);
    let out = normalize_cloud(&c, &dtm).unwrap();
    assert_eq!(out.cloud.points()[0].z, 15.0);
    assert_eq!(out.cloud.points()[1].z, 0.0);
}
