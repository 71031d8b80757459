use log::warn;
use rayon::prelude::*;

use super::{TerrainError, TriangulatedSurface};
use crate::cloud::{GridSpec, PointCloud, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChmStatus {
    /// Empty cells inside the occupied hull were interpolated.
    Complete,
    /// Fewer than three (or collinear) occupied cells: only occupied cells carry values.
    Sparse,
}

#[derive(Debug, Clone)]
pub struct ChmOutput {
    pub chm: Raster,
    pub status: ChmStatus,
    pub occupied_cells: usize,
}

fn cell_max(cloud: &PointCloud, grid: &GridSpec) -> Vec<f64> {
    let mut max = vec![f64::NAN; grid.len()];
    for p in cloud.points() {
        if let Some((r, c)) = grid.cell_of(p.x, p.y) {
            let m = &mut max[r * grid.ncols + c];
            if !(*m >= p.z) {
                *m = p.z;
            }
        }
    }
    max
}

/// Canopy height model on a grid covering the cloud, aligned to multiples of `cell_size`.
pub fn build_chm(normalized: &PointCloud, cell_size: f64) -> Result<ChmOutput, TerrainError> {
    if !(cell_size > 0.0) {
        return Err(TerrainError::InvalidParams(format!("cell size {cell_size}")));
    }
    let b = normalized.bounds().ok_or(TerrainError::EmptyCloud)?;
    build_chm_on(normalized, GridSpec::covering(&b, cell_size))
}

/// Per-cell maximum height; empty cells inside the hull of occupied cell
/// centers are filled by natural-neighbour interpolation of those centers.
pub fn build_chm_on(normalized: &PointCloud, grid: GridSpec) -> Result<ChmOutput, TerrainError> {
    if normalized.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    let mut values = cell_max(normalized, &grid);
    let centers: Vec<[f64; 3]> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .map(|(i, &v)| {
            let (x, y) = grid.cell_center(i / grid.ncols, i % grid.ncols);
            [x, y, v]
        })
        .collect();
    let occupied = centers.len();
    let tin = if occupied >= 3 {
        TriangulatedSurface::new(&centers).ok()
    } else {
        None
    };
    let status = match &tin {
        Some(tin) => {
            values.par_chunks_mut(grid.ncols).enumerate().for_each_init(
                || tin.natural_neighbor(),
                |nn, (r, row)| {
                    for (c, v) in row.iter_mut().enumerate() {
                        if v.is_nan() {
                            let (x, y) = grid.cell_center(r, c);
                            if let Some(z) = nn.value(x, y) {
                                *v = z;
                            }
                        }
                    }
                },
            );
            ChmStatus::Complete
        }
        None => {
            warn!("only {occupied} occupied CHM cell(s) in a line or fewer than 3; no interpolation");
            ChmStatus::Sparse
        }
    };
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(ChmOutput {
        chm: Raster::from_band(grid, "chm", values)?,
        status,
        occupied_cells: occupied,
    })
}

/// Absolute surface model: per-cell maximum of raw z, no filling.
pub fn build_dsm(cloud: &PointCloud, grid: GridSpec) -> Result<Raster, TerrainError> {
    Ok(Raster::from_band(grid, "dsm", cell_max(cloud, &grid))?)
}
