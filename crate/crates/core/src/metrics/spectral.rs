use std::fmt;
use std::str::FromStr;

use log::warn;

use super::{Metric, MetricVector, MetricsError};
use crate::cloud::{BoundingBox, GridSpec, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Blue,
    Green,
    Red,
    RedEdge,
    Nir,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Blue, Band::Green, Band::Red, Band::RedEdge, Band::Nir];

    pub fn name(self) -> &'static str {
        match self {
            Band::Blue => "blue",
            Band::Green => "green",
            Band::Red => "red",
            Band::RedEdge => "red_edge",
            Band::Nir => "nir",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match k.as_str() {
            "blue" | "b" => Band::Blue,
            "green" | "g" => Band::Green,
            "red" | "r" => Band::Red,
            "rededge" | "re" => Band::RedEdge,
            "nir" | "nearinfrared" => Band::Nir,
            _ => return Err(MetricsError::MissingBand(s.to_string())),
        })
    }
}

/// Co-registered reflectance bands. Bands may be absent; an index that needs
/// an absent band fails with `MissingBand`.
#[derive(Debug, Clone)]
pub struct SpectralBands {
    grid: GridSpec,
    bands: [Option<Vec<f64>>; 5],
}

impl SpectralBands {
    /// Picks bands out of a multi-band raster by name (`blue`, `green`,
    /// `red`, `red_edge`, `nir`; case and punctuation ignored).
    pub fn from_raster(r: &Raster) -> Self {
        let mut bands: [Option<Vec<f64>>; 5] = Default::default();
        for name in r.band_names() {
            if let Ok(b) = name.parse::<Band>() {
                bands[b as usize] = Some(r.band(name).expect("listed").to_vec());
            }
        }
        let out = SpectralBands { grid: *r.grid(), bands };
        out.warn_out_of_range();
        out
    }

    /// Uniform bands over a grid; handy for tests and constant scenes.
    pub fn constant(grid: GridSpec, values: [f64; 5]) -> Self {
        SpectralBands {
            grid,
            bands: values.map(|v| Some(vec![v; grid.len()])),
        }
    }

    pub fn from_values(grid: GridSpec, bands: [Option<Vec<f64>>; 5]) -> Result<Self, MetricsError> {
        for (b, v) in Band::ALL.iter().zip(&bands) {
            if let Some(v) = v {
                if v.len() != grid.len() {
                    return Err(MetricsError::Table(format!("band {b} has {} values, grid has {}", v.len(), grid.len())));
                }
            }
        }
        Ok(SpectralBands { grid, bands })
    }

    fn warn_out_of_range(&self) {
        for (b, v) in Band::ALL.iter().zip(&self.bands) {
            if let Some(v) = v {
                let n = v.iter().filter(|x| !x.is_nan() && !(0.0..=1.0).contains(*x)).count();
                if n > 0 {
                    warn!("{n} {b} reflectance value(s) outside [0, 1]");
                }
            }
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn has(&self, b: Band) -> bool {
        self.bands[b as usize].is_some()
    }

    pub fn band(&self, b: Band) -> Result<&[f64], MetricsError> {
        self.bands[b as usize]
            .as_deref()
            .ok_or_else(|| MetricsError::MissingBand(b.name().into()))
    }

    pub fn to_raster(&self) -> Result<Raster, MetricsError> {
        let mut out: Option<Raster> = None;
        for (b, v) in Band::ALL.iter().zip(&self.bands) {
            if let Some(v) = v {
                match out.as_mut() {
                    None => out = Some(Raster::from_band(self.grid, b.name(), v.clone())?),
                    Some(r) => r.add_band(b.name(), v.clone())?,
                }
            }
        }
        out.ok_or_else(|| MetricsError::MissingBand("all".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpectralOptions {
    /// Index every cell, then average (instead of indexing the band means).
    pub per_pixel: bool,
    /// RGRI = red / green and NormG = green / (red + green + blue).
    pub corrected: bool,
}

pub(crate) fn required_bands(m: Metric, corrected: bool) -> &'static [Band] {
    match m {
        Metric::Arvi => &[Band::Nir, Band::Red, Band::Blue],
        Metric::Dvi | Metric::Ndvi | Metric::Osavi => &[Band::Nir, Band::Red],
        Metric::Gndvi => &[Band::Nir, Band::Green],
        Metric::Rgri => &[Band::Red, Band::Green],
        Metric::NormG if corrected => &[Band::Red, Band::Green, Band::Blue],
        Metric::NormG => &[Band::Red, Band::Green],
        _ => &[],
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Index value from band reflectances `[blue, green, red, red_edge, nir]`.
fn index(m: Metric, b: &[f64; 5], corrected: bool) -> Option<f64> {
    let [blue, green, red, _, nir] = *b;
    match m {
        Metric::Arvi => {
            let rb = red - 0.5 * (blue - red);
            ratio(nir - rb, nir + rb)
        }
        Metric::Dvi => Some(nir - red),
        Metric::Gndvi => ratio(nir - green, nir + green),
        Metric::Ndvi => ratio(nir - red, nir + red),
        Metric::Osavi => ratio(nir - red, nir + red + 0.16),
        Metric::Rgri if corrected => ratio(red, green),
        Metric::Rgri => Some(red - green),
        Metric::NormG if corrected => ratio(green, red + green + blue),
        Metric::NormG => ratio(green, red + green + green),
        _ => None,
    }
}

/// Mean of each band over cells whose centers fall in the footprint, skipping nodata.
pub fn band_means(bands: &SpectralBands, footprint: &BoundingBox) -> [Option<f64>; 5] {
    let (rows, cols) = bands.grid.cells_with_centers_in(footprint);
    let mut out = [None; 5];
    for (k, v) in bands.bands.iter().enumerate() {
        let Some(v) = v else { continue };
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in rows.clone() {
            for c in cols.clone() {
                let x = v[r * bands.grid.ncols + c];
                if !x.is_nan() {
                    sum += x;
                    n += 1;
                }
            }
        }
        if n > 0 {
            out[k] = Some(sum / n as f64);
        }
    }
    out
}

/// Vegetation indices over a footprint.
///
/// Only `metrics` are computed (the spectral ones; structural entries are
/// ignored). An index with a zero denominator is left undefined.
pub fn spectral_indices(
    bands: &SpectralBands,
    footprint: &BoundingBox,
    metrics: &[Metric],
    opts: SpectralOptions,
) -> Result<MetricVector, MetricsError> {
    let wanted: Vec<Metric> = metrics.iter().copied().filter(|m| m.is_spectral()).collect();
    for m in &wanted {
        for b in required_bands(*m, opts.corrected) {
            bands.band(*b)?;
        }
    }
    let mut out = MetricVector::new("");
    if wanted.is_empty() {
        return Ok(out);
    }
    let (rows, cols) = bands.grid.cells_with_centers_in(footprint);
    if rows.is_empty() || cols.is_empty() {
        return Err(MetricsError::EmptyFootprint(format!("{footprint:?} misses the band grid")));
    }
    if !opts.per_pixel {
        let means = band_means(bands, footprint);
        for m in wanted {
            let needed = required_bands(m, opts.corrected);
            if needed.iter().any(|b| means[*b as usize].is_none()) {
                return Err(MetricsError::EmptyFootprint(format!("no defined {} cells for {m}", needed[0])));
            }
            let b = means.map(|v| v.unwrap_or(f64::NAN));
            out.set(m, index(m, &b, opts.corrected));
        }
        return Ok(out);
    }
    let mut sums = vec![(0.0, 0usize); wanted.len()];
    let mut any = false;
    for r in rows {
        for c in cols.clone() {
            let i = r * bands.grid.ncols + c;
            let b: [f64; 5] = std::array::from_fn(|k| bands.bands[k].as_ref().map_or(f64::NAN, |v| v[i]));
            for (s, m) in sums.iter_mut().zip(&wanted) {
                if required_bands(*m, opts.corrected).iter().any(|bb| b[*bb as usize].is_nan()) {
                    continue;
                }
                any = true;
                if let Some(v) = index(*m, &b, opts.corrected) {
                    s.0 += v;
                    s.1 += 1;
                }
            }
        }
    }
    if !any {
        return Err(MetricsError::EmptyFootprint("no defined band cells".into()));
    }
    for (s, m) in sums.iter().zip(&wanted) {
        out.set(*m, (s.1 > 0).then(|| s.0 / s.1 as f64));
    }
    Ok(out)
}
