//! Ordinary least squares over named predictors, all-subsets selection and
//! fit statistics, plus a file format for fitted models.

mod model;
mod ols;
mod qr;
mod subsets;

pub use model::{builtin_model, LinearModel, Prediction, Provenance};
pub use ols::{evaluate, fit_ols, loocv, FitStats};
pub use subsets::{all_subsets, write_ranking_csv, SubsetFit, SubsetReport, DEFAULT_MAX_CANDIDATES};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::NumericTable;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("column '{0}' not found")]
    MissingColumn(String),
    #[error("predictor '{0}' missing or undefined")]
    MissingPredictor(String),
    #[error("columns are collinear: {0:?}")]
    Collinear(Vec<String>),
    #[error("{n} usable rows cannot support {k} predictors plus an intercept")]
    TooFewRows { n: usize, k: usize },
    #[error("{0} candidate columns exceed the limit of {1}")]
    TooManyCandidates(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Complete-case design: every kept row has a defined value in every
/// candidate column and in the response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    ids: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    response_name: String,
    response: Vec<f64>,
    dropped: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        ids: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        response_name: impl Into<String>,
        response: Vec<f64>,
    ) -> Result<Self, RegressionError> {
        if names.len() != columns.len() {
            return Err(RegressionError::Invalid("one name per column required".into()));
        }
        let n = response.len();
        if ids.len() != n || columns.iter().any(|c| c.len() != n) {
            return Err(RegressionError::Invalid("all columns need one value per row".into()));
        }
        let all = columns.iter().flatten().chain(&response);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(RegressionError::Invalid("non-finite value in design".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(RegressionError::Invalid(format!("duplicate column '{a}'")));
            }
        }
        Ok(DesignMatrix {
            ids,
            names,
            columns,
            response_name: response_name.into(),
            response,
            dropped: Vec::new(),
        })
    }

    /// Pulls `candidates` and `response` out of a table, dropping (and
    /// recording) rows with any undefined value among them.
    pub fn from_table(table: &NumericTable, response: &str, candidates: &[String]) -> Result<Self, RegressionError> {
        let ri = table
            .column_index(response)
            .ok_or_else(|| RegressionError::MissingColumn(response.to_string()))?;
        let ci: Vec<usize> = candidates
            .iter()
            .map(|c| table.column_index(c).ok_or_else(|| RegressionError::MissingColumn(c.clone())))
            .collect::<Result<_, _>>()?;
        let mut ids = Vec::new();
        let mut dropped = Vec::new();
        let mut columns = vec![Vec::new(); ci.len()];
        let mut y = Vec::new();
        for (r, id) in table.ids().iter().enumerate() {
            let row = table.row(r);
            let vals: Option<Vec<f64>> = ci.iter().map(|&c| row[c].filter(|v| v.is_finite())).collect();
            match (vals, row[ri].filter(|v| v.is_finite())) {
                (Some(v), Some(resp)) => {
                    for (col, x) in columns.iter_mut().zip(v) {
                        col.push(x);
                    }
                    y.push(resp);
                    ids.push(id.clone());
                }
                _ => dropped.push(id.clone()),
            }
        }
        let mut d = DesignMatrix::new(ids, candidates.to_vec(), columns, response, y)?;
        d.dropped = dropped;
        Ok(d)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    /// Ids of rows excluded for undefined values.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn column(&self, name: &str) -> Result<&[f64], RegressionError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| RegressionError::MissingColumn(name.to_string()))
    }

    /// Keeps only the rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect(),
            response_name: self.response_name.clone(),
            response: idx.iter().map(|&i| self.response[i]).collect(),
            dropped: self.dropped.clone(),
        }
    }

    /// SHA-256 over ids, names and the bit patterns of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.ids {
            h.update(id.as_bytes());
            h.update([0]);
        }
        for (name, col) in self.names.iter().zip(&self.columns) {
            h.update(name.as_bytes());
            h.update([0]);
            for v in col {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.update(self.response_name.as_bytes());
        h.update([0]);
        for v in &self.response {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_table_drops_incomplete_rows() {
        let mut t = NumericTable::new("plot_id", vec!["a".into(), "b".into(), "y".into()]);
        t.push_row("p1".into(), vec![Some(1.0), Some(2.0), Some(3.0)]).unwrap();
        t.push_row("p2".into(), vec![Some(1.0), None, Some(3.0)]).unwrap();
        t.push_row("p3".into(), vec![Some(4.0), Some(5.0), None]).unwrap();
        t.push_row("p4".into(), vec![Some(7.0), Some(8.0), Some(9.0)]).unwrap();
        let d = DesignMatrix::from_table(&t, "y", &["a".into(), "b".into()]).unwrap();
        assert_eq!(d.ids(), ["p1", "p4"]);
        assert_eq!(d.dropped(), ["p2", "p3"]);
        assert_eq!(d.column("b").unwrap(), [2.0, 8.0]);
        // Only used columns matter.
        let d = DesignMatrix::from_table(&t, "y", &["a".into()]).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert!(DesignMatrix::from_table(&t, "z", &[]).is_err());
    }

    #[test]
    fn hash_is_content_sensitive() {
        let d = |v: f64| DesignMatrix::new(vec!["r".into()], vec!["a".into()], vec![vec![v]], "y", vec![1.0]).unwrap();
        assert_eq!(d(1.0).content_hash(), d(1.0).content_hash());
        assert_ne!(d(1.0).content_hash(), d(1.0 + f64::EPSILON).content_hash());
    }
}
