use std::fs;
use std::path::Path;

use super::stages::artifact as a;
use super::PipelineError;
use crate::cloud::Raster;
use crate::metrics::NumericTable;
use crate::regression::{all_subsets, DesignMatrix, LinearModel, DEFAULT_MAX_CANDIDATES};

fn need(out_dir: &Path, file: &str, stage: &'static str) -> Result<std::path::PathBuf, PipelineError> {
    let p = out_dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(PipelineError::MissingArtifact {
            stage,
            path: p.display().to_string(),
        })
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, PipelineError> {
    csv::Writer::from_path(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

fn csv_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(e.to_string())
}

/// Writes plot-ready CSV tables into `fig_dir` from the artifacts in
/// `out_dir`; returns the file names written.
pub fn emit_figure_data(out_dir: &Path, fig_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let heights = need(out_dir, a::REGISTRATION_HEIGHTS, "register")?;
    let fit_table = need(out_dir, a::FIT_TABLE, "fit")?;
    let ranking = need(out_dir, a::SUBSET_RANKING, "fit")?;
    let map = need(out_dir, a::AGB_MAP, "map")?;
    fs::create_dir_all(fig_dir).map_err(|e| PipelineError::Io(format!("{}: {e}", fig_dir.display())))?;
    let mut files = Vec::new();

    // Measured against extracted tree height, long format.
    let t = NumericTable::read_csv(&heights)?;
    let name = "registration_scatter.csv";
    let mut w = writer(&fig_dir.join(name))?;
    w.write_record(["scale", "tree_id", "measured", "extracted"]).map_err(csv_err)?;
    let measured = t.column("measured").unwrap_or_default();
    for col in t.columns().iter().filter(|c| c.starts_with("scale_")) {
        let scale = &col["scale_".len()..];
        let vals = t.column(col).unwrap_or_default();
        for ((id, m), e) in t.ids().iter().zip(&measured).zip(&vals) {
            if let (Some(m), Some(e)) = (m, e) {
                w.write_record([scale, id, &m.to_string(), &e.to_string()]).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(csv_err)?;
    files.push(name.to_string());

    let name = "subset_ranking.csv";
    fs::copy(&ranking, fig_dir.join(name)).map_err(|e| PipelineError::Io(format!("{}: {e}", ranking.display())))?;
    files.push(name.to_string());

    // Observed against fitted biomass for the best model of every size.
    let model = LinearModel::load(&out_dir.join(a::MODEL)).ok();
    let response = model
        .as_ref()
        .and_then(|m| m.response.clone())
        .unwrap_or_else(|| "agb_t_ha".to_string());
    let table = NumericTable::read_csv(&fit_table)?;
    let candidates: Vec<String> = table
        .columns()
        .iter()
        .filter(|c| **c != response && c.parse::<crate::metrics::Metric>().is_ok())
        .cloned()
        .collect();
    let x = DesignMatrix::from_table(&table, &response, &candidates)?;
    let max_size = model.as_ref().map_or(3, |m| m.predictors.len().max(3)).min(candidates.len());
    let report = all_subsets(&x, max_size, DEFAULT_MAX_CANDIDATES, false)?;
    let name = "predicted_vs_observed.csv";
    let mut w = writer(&fig_dir.join(name))?;
    w.write_record(["size", "predictors", "plot_id", "observed", "predicted"]).map_err(csv_err)?;
    for fit in &report.best_per_size {
        let cols: Vec<&[f64]> = fit
            .columns
            .iter()
            .map(|c| x.column(c))
            .collect::<Result<_, _>>()?;
        for (i, id) in x.ids().iter().enumerate() {
            let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            let pred = fit.model.linear_value(&row);
            w.write_record([
                fit.columns.len().to_string(),
                fit.columns.join("+"),
                id.clone(),
                x.response()[i].to_string(),
                pred.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)?;
    files.push(name.to_string());

    let r = Raster::read_ascii(&map, "agb_t_ha")?;
    let g = *r.grid();
    let name = "agb_map_grid.csv";
    let mut w = writer(&fig_dir.join(name))?;
    w.write_record(["row", "col", "x", "y", "agb_t_ha"]).map_err(csv_err)?;
    for row in 0..g.nrows {
        for col in 0..g.ncols {
            let (x, y) = g.cell_center(row, col);
            let v = r.get(row, col).filter(|v| !v.is_nan()).map_or(String::new(), |v| v.to_string());
            w.write_record([row.to_string(), col.to_string(), x.to_string(), y.to_string(), v])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)?;
    files.push(name.to_string());
    Ok(files)
}
