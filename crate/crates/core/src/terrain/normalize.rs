use rayon::prelude::*;

use super::TerrainError;
use crate::cloud::{Point3D, PointCloud, Raster};

#[derive(Debug, Clone)]
pub struct NormalizeOutput {
    /// Heights above terrain, negatives clamped to 0.
    pub cloud: PointCloud,
    /// Points over nodata terrain.
    pub dropped: usize,
}

/// Replaces every z by its height above the DTM (bilinear between cell centers).
pub fn normalize_cloud(cloud: &PointCloud, dtm: &Raster) -> Result<NormalizeOutput, TerrainError> {
    let out: Vec<Option<Point3D>> = cloud
        .points()
        .par_iter()
        .map(|p| {
            dtm.bilinear(p.x, p.y).map(|t| Point3D {
                z: (p.z - t).max(0.0),
                ..*p
            })
        })
        .collect();
    let kept: Vec<Point3D> = out.into_iter().flatten().collect();
    let dropped = cloud.len() - kept.len();
    if kept.is_empty() {
        return Err(TerrainError::EmptyOutput(format!(
            "all {} points lie over nodata terrain",
            cloud.len()
        )));
    }
    Ok(NormalizeOutput {
        cloud: cloud.derive(kept),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{GridSpec, SourceKind};

    fn flat(z: f64) -> Raster {
        let g = GridSpec {
            origin: (0.0, 10.0),
            cell_size: 0.5,
            nrows: 20,
            ncols: 20,
        };
        let mut v = vec![z; g.len()];
        v[0] = f64::NAN;
        Raster::from_band(g, "dtm", v).unwrap()
    }

    #[test]
    fn heights_clamps_and_drops() {
        let c = PointCloud::new(
            vec![Point3D::new(5.0, 5.0, 25.0), Point3D::new(3.0, 3.0, 8.0), Point3D::new(0.1, 9.9, 30.0), Point3D::new(50.0, 5.0, 1.0)],
            SourceKind::Dap,
        );
        let out = normalize_cloud(&c, &flat(10.0)).unwrap();
        assert_eq!(out.dropped, 2);
        assert_eq!(out.cloud.len() + out.dropped, c.len());
        assert_eq!(out.cloud.points()[0].z, 15.0);
        assert_eq!(out.cloud.points()[1].z, 0.0);
    }

    #[test]
    fn all_nodata_is_an_error() {
        let c = PointCloud::new(vec![Point3D::new(100.0, 100.0, 1.0)], SourceKind::Dap);
        assert!(matches!(normalize_cloud(&c, &flat(0.0)), Err(TerrainError::EmptyOutput(_))));
    }
}
