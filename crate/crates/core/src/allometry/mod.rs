//! Species allometry: height to DBH, component biomass per tree, and plot
//! biomass density.
//!
//! Formulas take D in cm and H in m. Biomass comes out in the model table's
//! mass unit (kg by default) and is converted to t/ha at the plot level.

mod models;
mod trees;

pub use models::{AgbComponents, BiomassTerm, DbhModel, MassUnit, ModelTable, SpeciesModel};
pub use trees::{
    parse_wkt_polygon, plot_agb, read_trees, write_plot_summary, write_tree_agb, PlotAgb, Polygon, TreeRecord,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllometryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown species '{0}'")]
    UnknownSpecies(String),
    #[error("no model for species {0}")]
    NoModel(SpeciesCode),
    #[error("model table: {0}")]
    ModelTable(String),
    #[error("invalid polygon: {0}")]
    Polygon(String),
    #[error("{path} line {line}: {message}")]
    Input { path: String, line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeciesCode {
    PY,
    PA,
    TC,
    CO,
    AF,
    PD,
    QA,
    AN,
}

impl SpeciesCode {
    pub const ALL: [SpeciesCode; 8] = [
        SpeciesCode::PY,
        SpeciesCode::PA,
        SpeciesCode::TC,
        SpeciesCode::CO,
        SpeciesCode::AF,
        SpeciesCode::PD,
        SpeciesCode::QA,
        SpeciesCode::AN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpeciesCode::PY => "PY",
            SpeciesCode::PA => "PA",
            SpeciesCode::TC => "TC",
            SpeciesCode::CO => "CO",
            SpeciesCode::AF => "AF",
            SpeciesCode::PD => "PD",
            SpeciesCode::QA => "QA",
            SpeciesCode::AN => "AN",
        }
    }

    pub fn is_conifer(self) -> bool {
        matches!(self, SpeciesCode::PY | SpeciesCode::PA | SpeciesCode::TC)
    }
}

impl fmt::Display for SpeciesCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpeciesCode {
    type Err = AllometryError;

    /// Case- and punctuation-insensitive: "P.Y.", "py" and "PY" all parse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_uppercase();
        SpeciesCode::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| AllometryError::UnknownSpecies(s.to_string()))
    }
}
