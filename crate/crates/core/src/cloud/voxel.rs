use super::{BoundingBox, CloudError, PointCloud};

/// Default cap on padded voxel count (512³).
pub const DEFAULT_MAX_VOXELS: usize = 512 * 512 * 512;

/// Dense 3D density grid over a region, zero-padded to power-of-two dims.
///
/// Values are stored x-fastest: `index = i + nx * (j + ny * k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSignal {
    origin: [f64; 3],
    voxel_size: f64,
    dims: [usize; 3],
    /// Occupied extent before padding.
    raw_dims: [usize; 3],
    values: Vec<f64>,
}

impl VoxelSignal {
    /// Wraps raw values. Dims must be powers of two, at least 2, and values
    /// non-negative.
    pub fn from_values(
        origin: [f64; 3],
        voxel_size: f64,
        dims: [usize; 3],
        values: Vec<f64>,
    ) -> Result<Self, CloudError> {
        if !(voxel_size > 0.0) {
            return Err(CloudError::Degenerate("voxel size must be positive".into()));
        }
        if dims.iter().any(|&d| d < 2 || !d.is_power_of_two()) {
            return Err(CloudError::Degenerate(format!(
                "dims {dims:?} must be powers of two >= 2"
            )));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(CloudError::Degenerate("value count does not match dims".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(CloudError::Degenerate(
                "voxel values must be finite and non-negative".into(),
            ));
        }
        Ok(VoxelSignal {
            origin,
            voxel_size,
            dims,
            raw_dims: dims,
            values,
        })
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Cell counts covering the region, before power-of-two padding.
    pub fn raw_dims(&self) -> [usize; 3] {
        self.raw_dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales values so they sum to one. No-op on an empty signal.
    pub fn normalized(mut self) -> Self {
        let total = self.total_mass();
        if total > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= total);
        }
        self
    }
}

/// Cell index along one axis: floor((c - origin) / size), with the max face
/// folded into the last cell. `None` outside `[0, n)`.
#[inline]
pub(crate) fn cell_index(coord: f64, origin: f64, size: f64, n: usize, max: f64) -> Option<usize> {
    if coord == max {
        return Some(n - 1);
    }
    let f = ((coord - origin) / size).floor();
    if f < 0.0 || f >= n as f64 {
        None
    } else {
        Some(f as usize)
    }
}

/// Counts points per voxel of `region`.
///
/// The region is split into `ceil(extent / voxel_size)` cells per axis (each
/// axis needs at least two), then padded with zeros to the next power of two.
pub fn voxelize(
    cloud: &PointCloud,
    voxel_size: f64,
    region: &BoundingBox,
    max_voxels: usize,
) -> Result<VoxelSignal, CloudError> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(CloudError::Degenerate("voxel size must be positive".into()));
    }
    if !region.is_valid() || region.min.iter().chain(&region.max).any(|v| !v.is_finite()) {
        return Err(CloudError::Degenerate("region must be a finite valid box".into()));
    }
    let extent = region.extent();
    let mut raw_dims = [0usize; 3];
    for a in 0..3 {
        let cells = (extent[a] / voxel_size).ceil();
        if !(cells >= 2.0) {
            return Err(CloudError::Degenerate(format!(
                "region spans {:.3} m on axis {a}, fewer than two {voxel_size} m voxels",
                extent[a]
            )));
        }
        if cells > max_voxels as f64 {
            return Err(CloudError::ResourceLimit {
                dims: [usize::MAX; 3],
                limit: max_voxels,
            });
        }
        raw_dims[a] = cells as usize;
    }
    let dims = raw_dims.map(usize::next_power_of_two);
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&t| t <= max_voxels);
    let Some(total) = total else {
        return Err(CloudError::ResourceLimit {
            dims,
            limit: max_voxels,
        });
    };

    let mut values = vec![0.0; total];
    for p in cloud.points() {
        if !region.contains(p) {
            continue;
        }
        let c = p.xyz();
        let mut idx = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            match cell_index(c[a], region.min[a], voxel_size, raw_dims[a], region.max[a]) {
                Some(v) => idx[a] = v,
                None => {
                    inside = false;
                    break;
                }
            }
        }
        if inside {
            values[idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])] += 1.0;
        }
    }
    Ok(VoxelSignal {
        origin: region.min,
        voxel_size,
        dims,
        raw_dims,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Point3D, SourceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<[f64; 3]>) -> PointCloud {
        PointCloud::new(
            points.into_iter().map(|[x, y, z]| Point3D::new(x, y, z)).collect(),
            SourceKind::Dap,
        )
    }

    #[test]
    fn single_point_at_origin() {
        let region = BoundingBox::new([0.0; 3], [4.0; 3]);
        let s = voxelize(&cloud(vec![[0.0, 0.0, 0.0]]), 2.0, &region, DEFAULT_MAX_VOXELS).unwrap();
        assert_eq!(s.dims(), [2, 2, 2]);
        assert_eq!(s.get(0, 0, 0), 1.0);
        assert_eq!(s.total_mass(), 1.0);
    }

    #[test]
    fn one_point_per_octant() {
        let region = BoundingBox::new([0.0; 3], [2.0; 3]);
        let mut pts = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    pts.push([0.5 + i as f64, 0.5 + j as f64, 0.5 + k as f64]);
                }
            }
        }
        let s = voxelize(&cloud(pts), 1.0, &region, DEFAULT_MAX_VOXELS).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn max_face_goes_to_last_cell_and_padding_is_zero() {
        let region = BoundingBox::new([0.0; 3], [3.0; 3]);
        let s = voxelize(&cloud(vec![[3.0, 3.0, 3.0]]), 1.0, &region, DEFAULT_MAX_VOXELS).unwrap();
        assert_eq!(s.raw_dims(), [3, 3, 3]);
        assert_eq!(s.dims(), [4, 4, 4]);
        assert_eq!(s.get(2, 2, 2), 1.0);
        assert_eq!(s.get(3, 3, 3), 0.0);
    }

    #[test]
    fn too_few_cells_is_degenerate() {
        let region = BoundingBox::new([0.0; 3], [10.0; 3]);
        let err = voxelize(&cloud(vec![[1.0; 3]]), 10.0, &region, DEFAULT_MAX_VOXELS).unwrap_err();
        assert!(matches!(err, CloudError::Degenerate(_)));
    }

    #[test]
    fn resource_limit() {
        let region = BoundingBox::new([0.0; 3], [100.0; 3]);
        let err = voxelize(&cloud(vec![[1.0; 3]]), 0.1, &region, DEFAULT_MAX_VOXELS).unwrap_err();
        assert!(matches!(err, CloudError::ResourceLimit { .. }));
    }

    #[test]
    fn mass_equals_in_region_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..20_000)
            .map(|_| {
                [
                    rng.random_range(-10.0..110.0),
                    rng.random_range(-10.0..60.0),
                    rng.random_range(0.0..30.0),
                ]
            })
            .collect();
        let region = BoundingBox::new([0.0, 0.0, 0.0], [100.0, 50.0, 25.0]);
        let expected = pts
            .iter()
            .filter(|p| {
                p[0] >= 0.0 && p[0] <= 100.0 && p[1] >= 0.0 && p[1] <= 50.0 && p[2] <= 25.0
            })
            .count();
        for size in [0.7, 1.0, 2.5, 7.0] {
            let s = voxelize(&cloud(pts.clone()), size, &region, DEFAULT_MAX_VOXELS).unwrap();
            assert_eq!(s.total_mass(), expected as f64, "voxel size {size}");
        }
    }

    proptest::proptest! {
        #[test]
        fn integer_translation_shifts_cells(seed in 0u64..500, nx in 0i32..4, ny in 0i32..4, nz in 0i32..3) {
            let v = 2.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<[f64; 3]> = (0..400)
                .map(|_| [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..10.0)])
                .collect();
            let shift = [nx as f64 * v, ny as f64 * v, nz as f64 * v];
            let moved: Vec<[f64; 3]> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
            let region = BoundingBox::new([0.0; 3], [40.0, 40.0, 20.0]);
            let a = voxelize(&cloud(pts), v, &region, DEFAULT_MAX_VOXELS).unwrap();
            let b = voxelize(&cloud(moved), v, &region, DEFAULT_MAX_VOXELS).unwrap();
            let d = a.dims();
            for k in 0..d[2] - nz as usize {
                for j in 0..d[1] - ny as usize {
                    for i in 0..d[0] - nx as usize {
                        proptest::prop_assert_eq!(
                            a.get(i, j, k),
                            b.get(i + nx as usize, j + ny as usize, k + nz as usize)
                        );
                    }
                }
            }
        }
    }
}
