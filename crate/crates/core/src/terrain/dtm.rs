use rayon::prelude::*;

use super::{TerrainError, TriangulatedSurface};
use crate::cloud::{GridSpec, PointCloud, Raster};

/// Terrain raster by linear interpolation on the ground TIN, sampled at cell
/// centers; nodata outside the hull.
pub fn build_dtm(ground: &PointCloud, cell_size: f64) -> Result<Raster, TerrainError> {
    if !(cell_size > 0.0) {
        return Err(TerrainError::InvalidParams(format!("cell size {cell_size}")));
    }
    let b = ground.bounds().ok_or(TerrainError::EmptyCloud)?;
    build_dtm_on(ground, GridSpec::covering(&b, cell_size))
}

pub fn build_dtm_on(ground: &PointCloud, grid: GridSpec) -> Result<Raster, TerrainError> {
    if ground.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    let pts: Vec<[f64; 3]> = ground.points().iter().map(|p| p.xyz()).collect();
    let tin = TriangulatedSurface::new(&pts)?;
    let mut values = vec![f64::NAN; grid.len()];
    values.par_chunks_mut(grid.ncols).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            let (x, y) = grid.cell_center(r, c);
            if let Some(z) = tin.interpolate_linear(x, y) {
                *v = z;
            }
        }
    });
    Ok(Raster::from_band(grid, "dtm", values)?)
}
