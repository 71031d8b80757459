use super::model::LinearModel;
use super::qr::{lstsq, LstsqOutcome};
use super::{DesignMatrix, RegressionError};

#[derive(Debug, Clone, PartialEq)]
pub struct FitStats {
    pub n: usize,
    pub r_squared: f64,
    pub rmse: f64,
    /// RMSE as a percentage of the mean response; undefined when the mean is 0.
    pub rrmse: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub aic: Option<f64>,
    /// The response had zero variance; `r_squared` is reported as 0.
    pub degenerate: bool,
}

/// Statistics of `predicted` against `observed`, with `k` fitted predictors
/// (used only for adjusted R² and AIC).
pub(crate) fn stats(observed: &[f64], predicted: &[f64], k: usize) -> FitStats {
    let n = observed.len();
    let nf = n as f64;
    let mean = observed.iter().sum::<f64>() / nf;
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    let sst: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    let degenerate = observed.iter().all(|o| *o == observed[0]);
    let r_squared = if degenerate { 0.0 } else { 1.0 - sse / sst };
    let rmse = (sse / nf).sqrt();
    let dof = n as f64 - k as f64 - 1.0;
    FitStats {
        n,
        r_squared,
        rmse,
        rrmse: (mean != 0.0).then(|| rmse / mean.abs() * 100.0),
        adj_r_squared: (dof > 0.0 && !degenerate).then(|| 1.0 - (1.0 - r_squared) * (nf - 1.0) / dof),
        aic: (sse > 0.0).then(|| nf * (sse / nf).ln() + 2.0 * (k as f64 + 1.0)),
        degenerate,
    }
}

/// Least-squares fit of the response on `columns` plus an intercept.
pub fn fit_ols(x: &DesignMatrix, columns: &[String]) -> Result<LinearModel, RegressionError> {
    let n = x.n_rows();
    let k = columns.len();
    if n <= k + 1 {
        return Err(RegressionError::TooFewRows { n, k });
    }
    let mut cols = Vec::with_capacity(k + 1);
    cols.push(vec![1.0; n]);
    for c in columns {
        cols.push(x.column(c)?.to_vec());
    }
    let beta = match lstsq(&cols, x.response()) {
        LstsqOutcome::Solved(b) => b,
        LstsqOutcome::RankDeficient(idx) => {
            let names = idx
                .into_iter()
                .map(|i| if i == 0 { "(intercept)".to_string() } else { columns[i - 1].clone() })
                .collect();
            return Err(RegressionError::Collinear(names));
        }
    };
    let mut model = LinearModel::new(columns.to_vec(), beta[1..].to_vec(), beta[0])?;
    model.response = Some(x.response_name().to_string());
    model.stats = Some(evaluate(&model, x)?);
    Ok(model)
}

/// Fit statistics of `model` on the rows of `x`.
pub fn evaluate(model: &LinearModel, x: &DesignMatrix) -> Result<FitStats, RegressionError> {
    if x.n_rows() == 0 {
        return Err(RegressionError::TooFewRows { n: 0, k: model.predictors.len() });
    }
    let cols: Vec<&[f64]> = model.predictors.iter().map(|p| x.column(p)).collect::<Result<_, _>>()?;
    let pred: Vec<f64> = (0..x.n_rows())
        .map(|r| {
            let row: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            model.linear_value(&row)
        })
        .collect();
    Ok(stats(x.response(), &pred, model.predictors.len()))
}

/// Leave-one-out statistics: each row predicted by a fit on the others.
pub fn loocv(x: &DesignMatrix, columns: &[String]) -> Result<FitStats, RegressionError> {
    let n = x.n_rows();
    let mut pred = Vec::with_capacity(n);
    for leave in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != leave).collect();
        let m = fit_ols(&x.select_rows(&keep), columns)?;
        let row: Vec<f64> = columns.iter().map(|c| x.column(c).map(|v| v[leave])).collect::<Result<_, _>>()?;
        pred.push(m.linear_value(&row));
    }
    Ok(stats(x.response(), &pred, columns.len()))
}
