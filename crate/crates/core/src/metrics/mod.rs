//! Plot- and cell-level predictors: vegetation indices from multispectral
//! bands and height-distribution statistics from normalized heights.

mod spectral;
mod structural;
mod table;

pub(crate) use spectral::required_bands;
pub use spectral::{band_means, spectral_indices, Band, SpectralBands, SpectralOptions};
pub use structural::{percentile, structural_metrics, HeightSource, DEFAULT_COVER_THRESHOLD};
pub use table::NumericTable;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cloud::CloudError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("band '{0}' is required but missing")]
    MissingBand(String),
    #[error("footprint contains no samples: {0}")]
    EmptyFootprint(String),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("table error: {0}")]
    Table(String),
}

/// Every predictor the toolkit knows, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Arvi,
    Dvi,
    Gndvi,
    Ndvi,
    Osavi,
    Rgri,
    NormG,
    H25,
    H50,
    H75,
    H95,
    Hmean,
    Hcv,
}

impl Metric {
    pub const ALL: [Metric; 13] = [
        Metric::Arvi,
        Metric::Dvi,
        Metric::Gndvi,
        Metric::Ndvi,
        Metric::Osavi,
        Metric::Rgri,
        Metric::NormG,
        Metric::H25,
        Metric::H50,
        Metric::H75,
        Metric::H95,
        Metric::Hmean,
        Metric::Hcv,
    ];

    pub const SPECTRAL: [Metric; 7] = [
        Metric::Arvi,
        Metric::Dvi,
        Metric::Gndvi,
        Metric::Ndvi,
        Metric::Osavi,
        Metric::Rgri,
        Metric::NormG,
    ];

    pub const STRUCTURAL: [Metric; 6] = [
        Metric::H25,
        Metric::H50,
        Metric::H75,
        Metric::H95,
        Metric::Hmean,
        Metric::Hcv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Arvi => "ARVI",
            Metric::Dvi => "DVI",
            Metric::Gndvi => "GNDVI",
            Metric::Ndvi => "NDVI",
            Metric::Osavi => "OSAVI",
            Metric::Rgri => "RGRI",
            Metric::NormG => "NormG",
            Metric::H25 => "h25",
            Metric::H50 => "h50",
            Metric::H75 => "h75",
            Metric::H95 => "h95",
            Metric::Hmean => "hmean",
            Metric::Hcv => "hcv",
        }
    }

    pub fn is_spectral(self) -> bool {
        (self as usize) < 7
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricsError;

    /// Case-insensitive; underscores are ignored (`h_75` = `h75`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == key)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

/// Named metric values for one plot or map cell. `None` marks an undefined
/// (or not computed) metric.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricVector {
    pub id: String,
    values: [Option<f64>; 13],
}

impl MetricVector {
    pub fn new(id: impl Into<String>) -> Self {
        MetricVector {
            id: id.into(),
            values: [None; 13],
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values[m.slot()]
    }

    pub fn set(&mut self, m: Metric, v: Option<f64>) {
        self.values[m.slot()] = v;
    }

    pub fn with(mut self, m: Metric, v: f64) -> Self {
        self.set(m, Some(v));
        self
    }

    /// Copies every defined value of `other` into `self`.
    pub fn merge(&mut self, other: &MetricVector) {
        for m in Metric::ALL {
            if let Some(v) = other.get(m) {
                self.set(m, Some(v));
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, Option<f64>)> + '_ {
        Metric::ALL.into_iter().map(|m| (m, self.get(m)))
    }

    pub fn to_row(&self) -> Vec<Option<f64>> {
        self.values.to_vec()
    }
}

/// Metric table with the standard column set.
pub fn metric_table(rows: &[MetricVector]) -> NumericTable {
    let mut t = NumericTable::new("plot_id", Metric::ALL.iter().map(|m| m.name().to_string()).collect());
    for r in rows {
        t.push_row(r.id.clone(), r.to_row()).expect("fixed width");
    }
    t
}

/// Reads rows back from a table carrying (at least) the standard columns.
pub fn metric_vectors(table: &NumericTable) -> Vec<MetricVector> {
    let cols: Vec<Option<usize>> = Metric::ALL.iter().map(|m| table.column_index(m.name())).collect();
    table
        .ids()
        .iter()
        .enumerate()
        .map(|(r, id)| {
            let mut mv = MetricVector::new(id.clone());
            for (m, c) in Metric::ALL.iter().zip(&cols) {
                if let Some(c) = c {
                    mv.set(*m, table.value(r, *c));
                }
            }
            mv
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("h_75".parse::<Metric>().unwrap(), Metric::H75);
        assert_eq!("osavi".parse::<Metric>().unwrap(), Metric::Osavi);
        assert!("NDRE".parse::<Metric>().is_err());
        assert!(Metric::NormG.is_spectral() && !Metric::H25.is_spectral());
    }
}
