//! Shared inputs for the benchmarks.

use canopyfuse::cloud::{PointCloud, Point3D, SourceKind};
use canopyfuse::pipeline::{generate_synthetic_scene, SceneParams, SyntheticScene};
use canopyfuse::regression::DesignMatrix;

/// A 90 m scene, small enough for criterion's repeated sampling.
pub fn scene() -> SyntheticScene {
    generate_synthetic_scene(&SceneParams {
        extent: 90.0,
        n_trees: 90,
        dap_density: 20.0,
        lidar_density: 1.0,
        strip_overlap: 20.0,
        n_plots: 16,
        plot_side: 20.0,
        ..SceneParams::default()
    })
    .expect("scene")
}

/// DAP points with the true terrain removed.
pub fn normalized_dap(scene: &SyntheticScene) -> PointCloud {
    let off = scene.params.dap_offset;
    let pts = scene
        .dap
        .points()
        .iter()
        .map(|p| {
            let (x, y) = (p.x - off[0], p.y - off[1]);
            Point3D::new(x, y, p.z - off[2] - scene.terrain_height(x, y))
        })
        .collect();
    PointCloud::new(pts, SourceKind::Dap)
}

/// `n` rows of `p` smooth, weakly correlated candidates and a linear response.
pub fn design(n: usize, p: usize) -> DesignMatrix {
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|i| ((i * (j + 3)) as f64 * 0.37 + j as f64).sin() * (j + 1) as f64).collect())
        .collect();
    let y = (0..n).map(|i| 100.0 + 3.0 * cols[0][i] - 2.0 * cols[p / 2][i] + (i as f64).cos()).collect();
    DesignMatrix::new(
        (0..n).map(|i| format!("p{i}")).collect(),
        (0..p).map(|j| format!("x{j}")).collect(),
        cols,
        "agb",
        y,
    )
    .expect("design")
}
