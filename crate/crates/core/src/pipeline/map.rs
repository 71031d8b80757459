use rayon::prelude::*;

use super::PipelineError;
use crate::cloud::{BoundingBox, GridSpec, Raster};
use crate::metrics::{
    required_bands, spectral_indices, structural_metrics, Band, HeightSource, Metric, MetricVector, MetricsError,
    SpectralBands, SpectralOptions, DEFAULT_COVER_THRESHOLD,
};
use crate::regression::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub cell_size: f64,
    pub cover_threshold: f64,
    pub spectral: SpectralOptions,
    /// Cells with a smaller defined share of their area are nodata.
    pub min_defined_fraction: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            cell_size: 15.0,
            cover_threshold: DEFAULT_COVER_THRESHOLD,
            spectral: SpectralOptions::default(),
            min_defined_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapOutput {
    /// Band `agb_t_ha`; nodata as NaN.
    pub raster: Raster,
    pub defined_cells: usize,
    /// Cells whose raw prediction was negative.
    pub clamped_cells: usize,
}

/// Map grid over the CHM extent, anchored at the CHM origin. A trailing
/// partial row or column is kept.
pub fn map_grid(chm: &GridSpec, cell_size: f64) -> GridSpec {
    let width = chm.ncols as f64 * chm.cell_size;
    let height = chm.nrows as f64 * chm.cell_size;
    // Tolerate representation error when the extent is a whole number of cells.
    let count = |len: f64| ((len / cell_size - 1e-9).ceil() as usize).max(1);
    GridSpec {
        origin: chm.origin,
        cell_size,
        nrows: count(height),
        ncols: count(width),
    }
}

/// Share of the nominal cell area whose grid cells (centers in `fp`) pass `defined`.
fn defined_share(grid: &GridSpec, fp: &BoundingBox, nominal_area: f64, defined: impl Fn(usize) -> bool) -> f64 {
    let (rows, cols) = grid.cells_with_centers_in(fp);
    let mut n = 0usize;
    for r in rows {
        for c in cols.clone() {
            if defined(r * grid.ncols + c) {
                n += 1;
            }
        }
    }
    n as f64 * grid.cell_size * grid.cell_size / nominal_area
}

/// Wall-to-wall biomass: the model applied to the metrics of every map cell,
/// structural metrics from the CHM.
pub fn map_agb(chm: &Raster, bands: &SpectralBands, model: &LinearModel, opts: &MapOptions) -> Result<MapOutput, PipelineError> {
    map_agb_with(chm, HeightSource::Chm(chm), bands, model, opts)
}

/// As [`map_agb`], with structural metrics from `heights`. The CHM still
/// fixes the grid and the defined share of each cell.
pub fn map_agb_with(
    chm: &Raster,
    heights: HeightSource<'_>,
    bands: &SpectralBands,
    model: &LinearModel,
    opts: &MapOptions,
) -> Result<MapOutput, PipelineError> {
    if !(opts.cell_size > 0.0) || !(opts.min_defined_fraction > 0.0 && opts.min_defined_fraction <= 1.0) {
        return Err(PipelineError::Validation(format!("invalid map options {opts:?}")));
    }
    let metrics = model.required_metrics().map_err(|e| PipelineError::Validation(e.to_string()))?;
    let spectral: Vec<Metric> = metrics.iter().copied().filter(|m| m.is_spectral()).collect();
    let structural = metrics.iter().any(|m| !m.is_spectral());
    let mut needed: Vec<Band> = Vec::new();
    for m in &spectral {
        for b in required_bands(*m, opts.spectral.corrected) {
            bands.band(*b).map_err(|e| PipelineError::Validation(format!("model {m}: {e}")))?;
            if !needed.contains(b) {
                needed.push(*b);
            }
        }
    }
    let band_values: Vec<&[f64]> = needed.iter().map(|b| bands.band(*b).expect("checked")).collect();

    let grid = map_grid(chm.grid(), opts.cell_size);
    let extent = chm.grid().bounds();
    let nominal = opts.cell_size * opts.cell_size;
    let chm_values = chm.values();

    let cell = |r: usize, c: usize| -> Result<Option<(f64, bool)>, PipelineError> {
        let x0 = grid.origin.0 + c as f64 * opts.cell_size;
        let y1 = grid.origin.1 - r as f64 * opts.cell_size;
        let fp = BoundingBox::footprint(
            x0,
            (y1 - opts.cell_size).max(extent.min[1]),
            (x0 + opts.cell_size).min(extent.max[0]),
            y1,
        );
        let mut share = f64::INFINITY;
        if structural || spectral.is_empty() {
            share = share.min(defined_share(chm.grid(), &fp, nominal, |i| !chm_values[i].is_nan()));
        }
        if !spectral.is_empty() {
            share = share.min(defined_share(bands.grid(), &fp, nominal, |i| band_values.iter().all(|v| !v[i].is_nan())));
        }
        if share < opts.min_defined_fraction {
            return Ok(None);
        }
        let mut mv = MetricVector::new(format!("r{r}c{c}"));
        if !spectral.is_empty() {
            match spectral_indices(bands, &fp, &spectral, opts.spectral) {
                Ok(v) => mv.merge(&v),
                Err(MetricsError::EmptyFootprint(_)) => return Ok(None),
                Err(e) => return Err(PipelineError::Validation(e.to_string())),
            }
        }
        if structural {
            match structural_metrics(heights, &fp, opts.cover_threshold) {
                Ok(v) => mv.merge(&v),
                Err(MetricsError::EmptyFootprint(_)) => return Ok(None),
                Err(e) => return Err(PipelineError::Validation(e.to_string())),
            }
        }
        Ok(model.predict(&mv).ok().map(|p| (p.value, p.clamped)))
    };

    let cells: Vec<Option<(f64, bool)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| cell(i / grid.ncols, i % grid.ncols))
        .collect::<Result<_, _>>()?;
    let defined_cells = cells.iter().filter(|c| c.is_some()).count();
    let clamped_cells = cells.iter().filter(|c| c.is_some_and(|(_, k)| k)).count();
    let values = cells.into_iter().map(|c| c.map_or(f64::NAN, |(v, _)| v)).collect();
    let raster = Raster::from_band(grid, "agb_t_ha", values).map_err(|e| PipelineError::Validation(e.to_string()))?;
    Ok(MapOutput {
        raster,
        defined_cells,
        clamped_cells,
    })
}
