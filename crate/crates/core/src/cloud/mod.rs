//! Point clouds, bounding boxes, voxel signals and rasters.
//!
//! Everything downstream (registration, terrain, metrics) consumes the types
//! defined here. Coordinates are meters in a shared projected CRS; the CRS tag
//! is carried along but never transformed.

mod io;
mod raster;
mod voxel;

pub use io::{load_cloud, save_cloud, CloudFormat};
pub use raster::{read_band_manifest, write_band_manifest, GridSpec, Raster, DEFAULT_NODATA};
pub use voxel::{voxelize, VoxelSignal, DEFAULT_MAX_VOXELS};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },
    #[error("point cloud {0} contains no points")]
    EmptyCloud(String),
    #[error("voxel grid {dims:?} exceeds the limit of {limit} voxels")]
    ResourceLimit { dims: [usize; 3], limit: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("raster error: {0}")]
    Raster(String),
}

/// Acquisition kind of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SourceKind {
    /// Photogrammetric (colored, surface-only).
    #[default]
    Dap,
    /// Laser scanning (intensity, penetrates the canopy).
    Lidar,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Dap => "DAP",
            SourceKind::Lidar => "LIDAR",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DAP" => Ok(SourceKind::Dap),
            "LIDAR" | "ALS" => Ok(SourceKind::Lidar),
            other => Err(format!("unknown source kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub color: Option<[u8; 3]>,
    pub intensity: Option<f32>,
    pub ground: Option<bool>,
}

impl Point3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3D {
            x,
            y,
            z,
            ..Default::default()
        }
    }

    pub fn with_color(mut self, rgb: [u8; 3]) -> Self {
        self.color = Some(rgb);
        self
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = Some(intensity);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Axis-aligned box, closed on every face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    /// Builds a box, swapping corners per axis if needed so that min <= max.
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Self {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = a[i].min(b[i]);
            max[i] = a[i].max(b[i]);
        }
        BoundingBox { min, max }
    }

    /// Box spanning all of z, for horizontal footprints.
    pub fn footprint(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BoundingBox::new(
            [min_x, min_y, f64::NEG_INFINITY],
            [max_x, max_y, f64::INFINITY],
        )
    }

    pub fn square(center_x: f64, center_y: f64, side: f64) -> Self {
        let h = side / 2.0;
        BoundingBox::footprint(center_x - h, center_y - h, center_x + h, center_y + h)
    }

    pub fn of_points<'a, I: IntoIterator<Item = &'a Point3D>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut min = first.xyz();
        let mut max = first.xyz();
        for p in it {
            let c = p.xyz();
            for i in 0..3 {
                min[i] = min[i].min(c[i]);
                max[i] = max[i].max(c[i]);
            }
        }
        Some(BoundingBox { min, max })
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn horizontal_area(&self) -> f64 {
        let e = self.extent();
        e[0] * e[1]
    }

    pub fn contains(&self, p: &Point3D) -> bool {
        self.contains_xyz(p.x, p.y, p.z)
    }

    pub fn contains_xyz(&self, x: f64, y: f64, z: f64) -> bool {
        x >= self.min[0]
            && x <= self.max[0]
            && y >= self.min[1]
            && y <= self.max[1]
            && z >= self.min[2]
            && z <= self.max[2]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let mut min = self.min;
        let mut max = self.max;
        for i in 0..3 {
            min[i] = min[i].min(other.min[i]);
            max[i] = max[i].max(other.max[i]);
        }
        BoundingBox { min, max }
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = self.min[i].max(other.min[i]);
            max[i] = self.max[i].min(other.max[i]);
            if min[i] > max[i] {
                return None;
            }
        }
        Some(BoundingBox { min, max })
    }

    pub fn expanded(&self, margin: f64) -> BoundingBox {
        BoundingBox {
            min: self.min.map(|v| v - margin),
            max: self.max.map(|v| v + margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3D>,
    source: SourceKind,
    bounds: Option<BoundingBox>,
    crs: Option<String>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3D>, source: SourceKind) -> Self {
        let bounds = BoundingBox::of_points(&points);
        PointCloud {
            points,
            source,
            bounds,
            crs: None,
        }
    }

    pub fn empty(source: SourceKind) -> Self {
        PointCloud::new(Vec::new(), source)
    }

    pub fn with_crs(mut self, crs: impl Into<String>) -> Self {
        self.crs = Some(crs.into());
        self
    }

    pub fn points(&self) -> &[Point3D] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3D> {
        self.points
    }

    pub fn source(&self) -> SourceKind {
        self.source
    }

    pub fn crs(&self) -> Option<&str> {
        self.crs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `None` for an empty cloud.
    pub fn bounds(&self) -> Option<BoundingBox> {
        self.bounds
    }

    /// Points per square meter of the horizontal bounds; `None` when the
    /// footprint has zero area.
    pub fn density(&self) -> Option<f64> {
        let area = self.bounds?.horizontal_area();
        (area > 0.0).then(|| self.points.len() as f64 / area)
    }

    /// Points inside the closed box; source kind and CRS are kept.
    pub fn crop(&self, bbox: &BoundingBox) -> PointCloud {
        let points = self
            .points
            .iter()
            .filter(|p| bbox.contains(p))
            .copied()
            .collect();
        PointCloud {
            crs: self.crs.clone(),
            ..PointCloud::new(points, self.source)
        }
    }

    /// Same source and CRS, different points.
    pub fn derive(&self, points: Vec<Point3D>) -> PointCloud {
        PointCloud {
            crs: self.crs.clone(),
            ..PointCloud::new(points, self.source)
        }
    }

    pub fn merge(clouds: &[PointCloud]) -> Option<PointCloud> {
        let first = clouds.first()?;
        let points = clouds.iter().flat_map(|c| c.points.iter().copied()).collect();
        Some(first.derive(points))
    }
}

/// Convenience wrapper so callers don't need the cloud type for a one-off crop.
pub fn crop(cloud: &PointCloud, bbox: &BoundingBox) -> PointCloud {
    cloud.crop(bbox)
}
