use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;

use super::ols::{fit_ols, loocv, FitStats};
use super::{DesignMatrix, LinearModel, RegressionError};

pub const DEFAULT_MAX_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    /// Column names in candidate order.
    pub columns: Vec<String>,
    pub model: LinearModel,
    pub loocv: Option<FitStats>,
}

impl SubsetFit {
    pub fn stats(&self) -> &FitStats {
        self.model.stats.as_ref().expect("fitted models carry stats")
    }

    fn sorted_names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetReport {
    /// Every successful fit, best R² first; ties by lexicographic column names.
    pub ranked: Vec<SubsetFit>,
    /// Best subset per size, index 0 = size 1.
    pub best_per_size: Vec<SubsetFit>,
    /// Subsets that could not be fitted, with the reason.
    pub failures: Vec<(Vec<String>, String)>,
}

impl SubsetReport {
    pub fn best(&self) -> Option<&SubsetFit> {
        self.ranked.first()
    }
}

fn subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            if cur.len() < max {
                rec(i + 1, n, max, cur, out);
            }
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut cur, &mut out);
    out
}

fn rank_order(a: &SubsetFit, b: &SubsetFit) -> Ordering {
    b.stats()
        .r_squared
        .total_cmp(&a.stats().r_squared)
        .then_with(|| a.sorted_names().cmp(&b.sorted_names()))
}

/// Fits every subset of the design's columns with 1..=max_size members and
/// ranks them by training R². With `with_loocv`, each size's best subset
/// also gets leave-one-out statistics.
pub fn all_subsets(
    x: &DesignMatrix,
    max_size: usize,
    max_candidates: usize,
    with_loocv: bool,
) -> Result<SubsetReport, RegressionError> {
    if max_size == 0 {
        return Err(RegressionError::Invalid("max_size must be at least 1".into()));
    }
    let names = x.names();
    if names.len() > max_candidates {
        return Err(RegressionError::TooManyCandidates(names.len(), max_candidates));
    }
    let results: Vec<Result<SubsetFit, (Vec<String>, String)>> = subsets(names.len(), max_size)
        .into_par_iter()
        .map(|idx| {
            let cols: Vec<String> = idx.iter().map(|&i| names[i].clone()).collect();
            match fit_ols(x, &cols) {
                Ok(model) => Ok(SubsetFit {
                    columns: cols,
                    model,
                    loocv: None,
                }),
                Err(e) => Err((cols, e.to_string())),
            }
        })
        .collect();
    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(f) => ranked.push(f),
            Err(f) => failures.push(f),
        }
    }
    ranked.sort_by(rank_order);
    let mut best_per_size: Vec<SubsetFit> = Vec::new();
    for size in 1..=max_size.min(names.len()) {
        if let Some(b) = ranked.iter().find(|f| f.columns.len() == size) {
            let mut b = b.clone();
            if with_loocv {
                b.loocv = loocv(x, &b.columns).ok();
            }
            best_per_size.push(b);
        }
    }
    Ok(SubsetReport {
        ranked,
        best_per_size,
        failures,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Per-size best subsets (or the full ranking with `all`), one row each.
pub fn write_ranking_csv(path: &Path, report: &SubsetReport, all: bool) -> Result<(), RegressionError> {
    let err = |e: csv::Error| RegressionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "size",
        "rank",
        "predictors",
        "r_squared",
        "adj_r_squared",
        "aic",
        "rmse",
        "rrmse",
        "loocv_r_squared",
        "loocv_rmse",
    ])
    .map_err(err)?;
    let rows: Vec<(usize, &SubsetFit)> = if all {
        report.ranked.iter().enumerate().map(|(i, f)| (i + 1, f)).collect()
    } else {
        report
            .best_per_size
            .iter()
            .map(|f| (report.ranked.iter().position(|r| r.columns == f.columns).unwrap_or(0) + 1, f))
            .collect()
    };
    for (rank, f) in rows {
        let s = f.stats();
        w.write_record([
            f.columns.len().to_string(),
            rank.to_string(),
            f.columns.join("+"),
            s.r_squared.to_string(),
            opt(s.adj_r_squared),
            opt(s.aic),
            s.rmse.to_string(),
            opt(s.rrmse),
            opt(f.loocv.as_ref().map(|l| l.r_squared)),
            opt(f.loocv.as_ref().map(|l| l.rmse)),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| RegressionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration() {
        let s = subsets(4, 2);
        assert_eq!(s.len(), 4 + 6);
        assert_eq!(subsets(5, 5).len(), 31);
        assert_eq!(subsets(3, 1), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn candidate_limit() {
        let n = 3;
        let names: Vec<String> = (0..21).map(|i| format!("c{i:02}")).collect();
        let cols = vec![vec![1.0, 2.0, 3.0]; 21];
        let x = DesignMatrix::new((0..n).map(|i| i.to_string()).collect(), names, cols, "y", vec![1.0, 2.0, 4.0]).unwrap();
        assert!(matches!(all_subsets(&x, 1, 20, false), Err(RegressionError::TooManyCandidates(21, 20))));
    }
}
