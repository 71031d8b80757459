//! Georeferenced grids and ESRI ASCII exchange.
//!
//! In memory, missing cells are `NaN`; the `nodata` sentinel only exists on
//! disk. Rows run north to south: row 0 is the top edge at `origin.1`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{BoundingBox, CloudError};

pub const DEFAULT_NODATA: f64 = -9999.0;

/// Geometry of a raster grid. `origin` is the upper-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub nrows: usize,
    pub ncols: usize,
}

impl GridSpec {
    /// Smallest grid aligned to multiples of `cell_size` that covers the box.
    pub fn covering(bounds: &BoundingBox, cell_size: f64) -> GridSpec {
        let x0 = (bounds.min[0] / cell_size).floor() * cell_size;
        let y_top = (bounds.max[1] / cell_size).ceil() * cell_size;
        let ncols = (((bounds.max[0] - x0) / cell_size).ceil() as usize).max(1);
        let nrows = (((y_top - bounds.min[1]) / cell_size).ceil() as usize).max(1);
        // A point on the right/bottom edge of the last cell must still fall inside.
        let ncols = if x0 + ncols as f64 * cell_size < bounds.max[0] { ncols + 1 } else { ncols };
        let nrows = if y_top - nrows as f64 * cell_size > bounds.min[1] { nrows + 1 } else { nrows };
        GridSpec {
            origin: (x0, y_top),
            cell_size,
            nrows,
            ncols,
        }
    }

    pub fn len(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 - (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing (x, y); right and bottom outer edges fold into the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fc = ((x - self.origin.0) / self.cell_size).floor();
        let fr = ((self.origin.1 - y) / self.cell_size).floor();
        let col = if fc == self.ncols as f64 && x == self.max_x() { fc - 1.0 } else { fc };
        let row = if fr == self.nrows as f64 && y == self.min_y() { fr - 1.0 } else { fr };
        if col < 0.0 || row < 0.0 || col >= self.ncols as f64 || row >= self.nrows as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn max_x(&self) -> f64 {
        self.origin.0 + self.ncols as f64 * self.cell_size
    }

    pub fn min_y(&self) -> f64 {
        self.origin.1 - self.nrows as f64 * self.cell_size
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::footprint(self.origin.0, self.min_y(), self.max_x(), self.origin.1)
    }

    /// Row/column ranges (inclusive start, exclusive end) of cells whose
    /// centers fall inside the closed footprint.
    pub fn cells_with_centers_in(&self, fp: &BoundingBox) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |n: usize, inside: &dyn Fn(usize) -> bool| {
            let lo = (0..n).find(|&i| inside(i)).unwrap_or(n);
            let hi = (lo..n).rev().find(|&i| inside(i)).map_or(lo, |i| i + 1);
            lo..hi
        };
        let rows = span(self.nrows, &|r| {
            let y = self.cell_center(r, 0).1;
            y >= fp.min[1] && y <= fp.max[1]
        });
        let cols = span(self.ncols, &|c| {
            let x = self.cell_center(0, c).0;
            x >= fp.min[0] && x <= fp.max[0]
        });
        (rows, cols)
    }
}

/// Single- or multi-band grid. All bands share the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    grid: GridSpec,
    bands: Vec<(String, Vec<f64>)>,
    nodata: f64,
}

impl Raster {
    /// All-NaN raster with one band.
    pub fn new(grid: GridSpec, band: impl Into<String>) -> Raster {
        Raster {
            bands: vec![(band.into(), vec![f64::NAN; grid.len()])],
            grid,
            nodata: DEFAULT_NODATA,
        }
    }

    pub fn from_band(
        grid: GridSpec,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Raster, CloudError> {
        let mut r = Raster {
            grid,
            bands: Vec::new(),
            nodata: DEFAULT_NODATA,
        };
        r.add_band(name, values)?;
        Ok(r)
    }

    pub fn add_band(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), CloudError> {
        if !(self.grid.cell_size > 0.0) {
            return Err(CloudError::Raster("cell size must be positive".into()));
        }
        if values.len() != self.grid.len() {
            return Err(CloudError::Raster(format!(
                "band has {} values, grid has {} cells",
                values.len(),
                self.grid.len()
            )));
        }
        let name = name.into();
        if self.bands.iter().any(|(n, _)| *n == name) {
            return Err(CloudError::Raster(format!("duplicate band '{name}'")));
        }
        self.bands.push((name, values));
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn band_names(&self) -> impl Iterator<Item = &str> {
        self.bands.iter().map(|(n, _)| n.as_str())
    }

    pub fn band(&self, name: &str) -> Option<&[f64]> {
        self.bands
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Values of the first band.
    pub fn values(&self) -> &[f64] {
        &self.bands[0].1
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.bands[0].1
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values()[row * self.grid.ncols + col];
        (!v.is_nan()).then_some(v)
    }

    /// Value of the first band at the cell containing (x, y).
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (r, c) = self.grid.cell_of(x, y)?;
        self.get(r, c)
    }

    /// Bilinear interpolation between the four surrounding cell centers.
    ///
    /// `None` if the containing cell is nodata. Nodata neighbours are left out
    /// and the remaining weights renormalised; positions between the outer
    /// cell centers and the raster edge clamp to the edge row/column.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let g = &self.grid;
        self.sample(x, y)?;
        let fx = (x - g.origin.0) / g.cell_size - 0.5;
        let fy = (g.origin.1 - y) / g.cell_size - 0.5;
        let c0 = fx.floor();
        let r0 = fy.floor();
        let tx = fx - c0;
        let ty = fy - r0;
        let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64 - 1.0) as usize;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (dr, wr) in [(0.0, 1.0 - ty), (1.0, ty)] {
            for (dc, wc) in [(0.0, 1.0 - tx), (1.0, tx)] {
                let w = wr * wc;
                if w == 0.0 {
                    continue;
                }
                let r = clamp(r0 + dr, g.nrows);
                let c = clamp(c0 + dc, g.ncols);
                if let Some(v) = self.get(r, c) {
                    acc += w * v;
                    wsum += w;
                }
            }
        }
        (wsum > 0.0).then(|| acc / wsum)
    }

    /// Writes the first band as an ESRI ASCII grid.
    pub fn write_ascii(&self, path: &Path) -> Result<(), CloudError> {
        self.write_band_ascii(path, 0)
    }

    fn write_band_ascii(&self, path: &Path, band: usize) -> Result<(), CloudError> {
        let g = &self.grid;
        let values = &self.bands[band].1;
        let mut out = String::with_capacity(values.len() * 8 + 128);
        let _ = writeln!(out, "ncols {}", g.ncols);
        let _ = writeln!(out, "nrows {}", g.nrows);
        let _ = writeln!(out, "xllcorner {}", g.origin.0);
        let _ = writeln!(out, "yllcorner {}", g.min_y());
        let _ = writeln!(out, "cellsize {}", g.cell_size);
        let _ = writeln!(out, "NODATA_value {}", self.nodata);
        for row in values.chunks(g.ncols) {
            let mut first = true;
            for &v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                if v.is_nan() {
                    let _ = write!(out, "{}", self.nodata);
                } else if v == self.nodata {
                    return Err(CloudError::Raster(format!(
                        "computed value {v} collides with the nodata sentinel"
                    )));
                } else {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| CloudError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_ascii(path: &Path, band_name: &str) -> Result<Raster, CloudError> {
        let text = fs::read_to_string(path).map_err(|source| CloudError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let perr = |line: usize, msg: String| CloudError::Parse {
            path: path.display().to_string(),
            location: format!("line {line}"),
            message: msg,
        };
        let mut lines = text.lines().enumerate();
        let mut header = std::collections::HashMap::new();
        let mut first_data: Option<(usize, &str)> = None;
        for (i, line) in lines.by_ref() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut parts = t.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            if key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let val = parts
                    .next()
                    .ok_or_else(|| perr(i + 1, format!("missing value for '{key}'")))?;
                let val: f64 = val
                    .parse()
                    .map_err(|_| perr(i + 1, format!("bad header value '{val}'")))?;
                header.insert(key, val);
            } else {
                first_data = Some((i, line));
                break;
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .copied()
                .ok_or_else(|| perr(1, format!("missing header key '{k}'")))
        };
        let ncols = get("ncols")? as usize;
        let nrows = get("nrows")? as usize;
        let cell_size = get("cellsize")?;
        let nodata = header.get("nodata_value").copied().unwrap_or(DEFAULT_NODATA);
        let xll = match header.get("xllcorner") {
            Some(v) => *v,
            None => get("xllcenter")? - cell_size / 2.0,
        };
        let yll = match header.get("yllcorner") {
            Some(v) => *v,
            None => get("yllcenter")? - cell_size / 2.0,
        };
        let grid = GridSpec {
            origin: (xll, yll + nrows as f64 * cell_size),
            cell_size,
            nrows,
            ncols,
        };
        let mut values = Vec::with_capacity(grid.len());
        for (i, line) in first_data.into_iter().chain(lines) {
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| perr(i + 1, format!("bad cell value '{tok}'")))?;
                values.push(if v == nodata { f64::NAN } else { v });
            }
        }
        if values.len() != grid.len() {
            return Err(perr(
                text.lines().count(),
                format!("expected {} cell values, found {}", grid.len(), values.len()),
            ));
        }
        let mut r = Raster::from_band(grid, band_name, values)?;
        r.nodata = nodata;
        Ok(r)
    }

    /// Writes every band to `<dir>/<stem>_<band>.asc` plus a manifest listing
    /// `band file` pairs, one per line.
    pub fn write_multiband(&self, dir: &Path, stem: &str) -> Result<PathBuf, CloudError> {
        fs::create_dir_all(dir).map_err(|source| CloudError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, (name, _)) in self.bands.iter().enumerate() {
            let file = format!("{stem}_{name}.asc");
            self.write_band_ascii(&dir.join(&file), i)?;
            entries.push((name.clone(), file));
        }
        let manifest = dir.join(format!("{stem}_manifest.txt"));
        write_band_manifest(&manifest, &entries)?;
        Ok(manifest)
    }

    /// Reads the bands listed in a manifest; paths are relative to it.
    pub fn read_multiband(manifest: &Path) -> Result<Raster, CloudError> {
        let entries = read_band_manifest(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut out: Option<Raster> = None;
        for (name, file) in entries {
            let r = Raster::read_ascii(&base.join(&file), &name)?;
            match out.as_mut() {
                None => out = Some(r),
                Some(acc) => {
                    if acc.grid != r.grid {
                        return Err(CloudError::Raster(format!(
                            "band '{name}' is not co-registered with the first band"
                        )));
                    }
                    let (n, v) = r.bands.into_iter().next().expect("one band");
                    acc.add_band(n, v)?;
                }
            }
        }
        out.ok_or_else(|| CloudError::Raster(format!("{} lists no bands", manifest.display())))
    }
}

pub fn write_band_manifest(path: &Path, entries: &[(String, String)]) -> Result<(), CloudError> {
    let mut s = String::from("# band file\n");
    for (name, file) in entries {
        let _ = writeln!(s, "{name} {file}");
    }
    fs::write(path, s).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_band_manifest(path: &Path) -> Result<Vec<(String, String)>, CloudError> {
    let text = fs::read_to_string(path).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(file), None) => out.push((name.to_string(), file.to_string())),
            _ => {
                return Err(CloudError::Parse {
                    path: path.display().to_string(),
                    location: format!("line {}", i + 1),
                    message: "expected '<band> <file>'".into(),
                })
            }
        }
    }
    Ok(out)
}
