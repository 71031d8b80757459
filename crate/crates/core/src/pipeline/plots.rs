use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::allometry::Polygon;
use crate::cloud::BoundingBox;

/// Square field plot. Footprints may overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotDefinition {
    pub plot_id: String,
    pub center_x: f64,
    pub center_y: f64,
    #[serde(default = "default_side")]
    pub side: f64,
    /// Observed biomass density, t/ha.
    #[serde(default)]
    pub agb_obs: Option<f64>,
}

fn default_side() -> f64 {
    30.0
}

impl PlotDefinition {
    pub fn footprint(&self) -> BoundingBox {
        BoundingBox::square(self.center_x, self.center_y, self.side)
    }

    pub fn polygon(&self) -> Polygon {
        let h = self.side / 2.0;
        Polygon::rectangle(self.center_x - h, self.center_y - h, self.center_x + h, self.center_y + h)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

/// Reads `plot_id,center_x,center_y,side[,agb_obs]`.
pub fn read_plots(path: &Path) -> Result<Vec<PlotDefinition>, PipelineError> {
    let p = path.display();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| PipelineError::Validation(format!("{p}: {e}")))?;
    let mut out: Vec<PlotDefinition> = Vec::new();
    for (i, row) in rdr.deserialize::<PlotDefinition>().enumerate() {
        let line = i + 2;
        let plot = row.map_err(|e| PipelineError::Validation(format!("{p} line {line}: {e}")))?;
        if !(plot.side > 0.0) || !plot.center_x.is_finite() || !plot.center_y.is_finite() {
            return Err(PipelineError::Validation(format!("{p} line {line}: invalid plot geometry")));
        }
        if out.iter().any(|o| o.plot_id == plot.plot_id) {
            return Err(PipelineError::Validation(format!("{p} line {line}: duplicate plot id '{}'", plot.plot_id)));
        }
        out.push(plot);
    }
    Ok(out)
}

pub fn write_plots(path: &Path, plots: &[PlotDefinition]) -> Result<(), PipelineError> {
    let err = |e: csv::Error| PipelineError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let with_obs = plots.iter().any(|p| p.agb_obs.is_some());
    let mut header = vec!["plot_id", "center_x", "center_y", "side"];
    if with_obs {
        header.push("agb_obs");
    }
    w.write_record(&header).map_err(err)?;
    for p in plots {
        let mut rec = vec![p.plot_id.clone(), p.center_x.to_string(), p.center_y.to_string(), p.side.to_string()];
        if with_obs {
            rec.push(p.agb_obs.map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}
