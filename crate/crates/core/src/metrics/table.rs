use std::path::Path;

use super::MetricsError;

/// A CSV table keyed by a string id column, with optional numeric values.
/// Empty fields (and `NA`/`nan`) read as undefined and are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    id_column: String,
    columns: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn new(id_column: impl Into<String>, columns: Vec<String>) -> Self {
        NumericTable {
            id_column: id_column.into(),
            columns,
            ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn id_column(&self) -> &str {
        &self.id_column
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        &self.rows[row]
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn push_row(&mut self, id: String, values: Vec<Option<f64>>) -> Result<(), MetricsError> {
        if values.len() != self.columns.len() {
            return Err(MetricsError::Table(format!(
                "row '{id}' has {} values, table has {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.ids.push(id);
        self.rows.push(values);
        Ok(())
    }

    /// Adds (or replaces) a column, matching rows by id. Rows without a
    /// value get `None`.
    pub fn set_column(&mut self, name: &str, values: &[(String, Option<f64>)]) {
        let c = match self.column_index(name) {
            Some(c) => c,
            None => {
                self.columns.push(name.to_string());
                for r in &mut self.rows {
                    r.push(None);
                }
                self.columns.len() - 1
            }
        };
        for (id, v) in values {
            if let Some(r) = self.ids.iter().position(|x| x == id) {
                self.rows[r][c] = *v;
            }
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| MetricsError::Table(format!("{}: {e}", path.display())))?;
        let header = rdr
            .headers()
            .map_err(|e| MetricsError::Table(format!("{}: {e}", path.display())))?
            .clone();
        let mut it = header.iter();
        let id_column = it
            .next()
            .ok_or_else(|| MetricsError::Table(format!("{}: empty header", path.display())))?;
        let mut t = NumericTable::new(id_column, it.map(str::to_string).collect());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| MetricsError::Table(format!("{}: {e}", path.display())))?;
            let mut f = rec.iter();
            let id = f.next().unwrap_or_default().to_string();
            let mut vals = Vec::with_capacity(t.columns.len());
            for (k, s) in f.enumerate() {
                vals.push(parse_cell(s).map_err(|_| {
                    MetricsError::Table(format!(
                        "{} line {}: column '{}' value '{s}' is not numeric",
                        path.display(),
                        line + 2,
                        t.columns.get(k).map_or("?", |c| c.as_str())
                    ))
                })?);
            }
            t.push_row(id, vals)?;
        }
        Ok(t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let err = |e: csv::Error| MetricsError::Table(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec![self.id_column.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| MetricsError::Table(format!("{}: {e}", path.display())))
    }
}

fn parse_cell(s: &str) -> Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>().map(Some)
}
