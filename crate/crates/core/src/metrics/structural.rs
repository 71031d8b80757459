use super::{Metric, MetricVector, MetricsError};
use crate::cloud::{BoundingBox, PointCloud, Raster};

/// Heights above this (meters) count as canopy cover.
pub const DEFAULT_COVER_THRESHOLD: f64 = 2.0;

/// Where normalized heights come from.
#[derive(Debug, Clone, Copy)]
pub enum HeightSource<'a> {
    /// Point heights of a normalized cloud.
    Cloud(&'a PointCloud),
    /// Defined cells of a CHM whose centers fall in the footprint.
    Chm(&'a Raster),
}

/// Linear-interpolation percentile at position (n - 1) p of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(if lo == hi { sorted[lo] } else { sorted[lo] + (sorted[hi] - sorted[lo]) * frac })
}

fn samples(src: HeightSource<'_>, fp: &BoundingBox) -> Vec<f64> {
    match src {
        HeightSource::Cloud(c) => c
            .points()
            .iter()
            .filter(|p| fp.contains_xy(p.x, p.y))
            .map(|p| p.z)
            .collect(),
        HeightSource::Chm(r) => {
            let g = r.grid();
            let (rows, cols) = g.cells_with_centers_in(fp);
            let v = r.values();
            let mut out = Vec::with_capacity(rows.len() * cols.len());
            for row in rows {
                for c in cols.clone() {
                    let x = v[row * g.ncols + c];
                    if !x.is_nan() {
                        out.push(x);
                    }
                }
            }
            out
        }
    }
}

/// Height percentiles, mean of non-ground heights, and the coefficient of
/// variation of heights above `cover_threshold`.
///
/// `hmean` is 0 when no height is above 0; `hcv` is undefined with fewer
/// than two heights above the threshold.
pub fn structural_metrics(
    src: HeightSource<'_>,
    footprint: &BoundingBox,
    cover_threshold: f64,
) -> Result<MetricVector, MetricsError> {
    let mut h = samples(src, footprint);
    if h.is_empty() {
        return Err(MetricsError::EmptyFootprint(format!("no heights in {footprint:?}")));
    }
    h.sort_by(f64::total_cmp);
    let mut out = MetricVector::new("");
    for (m, p) in [(Metric::H25, 0.25), (Metric::H50, 0.5), (Metric::H75, 0.75), (Metric::H95, 0.95)] {
        out.set(m, percentile(&h, p));
    }
    let above0: Vec<f64> = h.iter().copied().filter(|v| *v > 0.0).collect();
    out.set(
        Metric::Hmean,
        Some(if above0.is_empty() { 0.0 } else { above0.iter().sum::<f64>() / above0.len() as f64 }),
    );
    let cover: Vec<f64> = h.iter().copied().filter(|v| *v > cover_threshold).collect();
    let hcv = if cover.len() >= 2 {
        let n = cover.len() as f64;
        let mean = cover.iter().sum::<f64>() / n;
        let var = cover.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some(var.sqrt() / mean)
    } else {
        None
    };
    out.set(Metric::Hcv, hcv);
    Ok(out)
}
