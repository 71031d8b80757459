use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ols::FitStats;
use super::RegressionError;
use crate::metrics::{Metric, MetricVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Where the model came from: `builtin`, or the fitting command.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
    pub created: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub predictors: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub response: Option<String>,
    pub stats: Option<FitStats>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// The raw linear value was negative and `value` was set to 0.
    pub clamped: bool,
}

impl LinearModel {
    pub fn new(predictors: Vec<String>, coefficients: Vec<f64>, intercept: f64) -> Result<Self, RegressionError> {
        if predictors.len() != coefficients.len() {
            return Err(RegressionError::Invalid(format!(
                "{} predictors but {} coefficients",
                predictors.len(),
                coefficients.len()
            )));
        }
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(RegressionError::Invalid("non-finite coefficient".into()));
        }
        Ok(LinearModel {
            predictors,
            coefficients,
            intercept,
            response: None,
            stats: None,
            provenance: None,
        })
    }

    /// intercept + Σ coefficient·value, values in predictor order, no clamping.
    pub fn linear_value(&self, values: &[f64]) -> f64 {
        self.coefficients.iter().zip(values).fold(self.intercept, |acc, (c, v)| acc + c * v)
    }

    /// Metrics the model reads, if every predictor names a known metric.
    pub fn required_metrics(&self) -> Result<Vec<Metric>, RegressionError> {
        self.predictors
            .iter()
            .map(|p| p.parse::<Metric>().map_err(|_| RegressionError::MissingPredictor(p.clone())))
            .collect()
    }

    /// Prediction from predictor values looked up by name. Negative values
    /// are clamped to 0.
    pub fn predict_with(&self, lookup: impl Fn(&str) -> Option<f64>) -> Result<Prediction, RegressionError> {
        let values: Vec<f64> = self
            .predictors
            .iter()
            .map(|p| lookup(p).filter(|v| v.is_finite()).ok_or_else(|| RegressionError::MissingPredictor(p.clone())))
            .collect::<Result<_, _>>()?;
        let raw = self.linear_value(&values);
        Ok(if raw < 0.0 {
            Prediction { value: 0.0, clamped: true }
        } else {
            Prediction { value: raw, clamped: false }
        })
    }

    pub fn predict(&self, metrics: &MetricVector) -> Result<Prediction, RegressionError> {
        self.predict_with(|name| name.parse::<Metric>().ok().and_then(|m| metrics.get(m)))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, RegressionError> {
        let f: ModelFile = toml::from_str(s).map_err(|e| RegressionError::ModelFile(e.to_string()))?;
        f.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<(), RegressionError> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| RegressionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, RegressionError> {
        let s = std::fs::read_to_string(path).map_err(|e| RegressionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        LinearModel::from_toml_str(&s)
    }
}

/// The published plot AGB model (t/ha) over OSAVI, DVI and h75.
pub fn builtin_model() -> LinearModel {
    let mut m = LinearModel::new(
        vec!["OSAVI".into(), "DVI".into(), "h75".into()],
        vec![4398.0, -17410.0, 4.018],
        -57.78,
    )
    .expect("valid built-in model");
    m.response = Some("agb_t_ha".into());
    m.provenance = Some(Provenance {
        source: "builtin".into(),
        data_sha256: None,
        created: "1970-01-01T00:00:00Z".into(),
    });
    m
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsFile {
    n: usize,
    r_squared: f64,
    rmse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rrmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adj_r_squared: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aic: Option<f64>,
    #[serde(default)]
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    predictors: Vec<String>,
    coefficients: Vec<f64>,
    intercept: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stats: Option<StatsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<&LinearModel> for ModelFile {
    fn from(m: &LinearModel) -> Self {
        ModelFile {
            response: m.response.clone(),
            predictors: m.predictors.clone(),
            coefficients: m.coefficients.clone(),
            intercept: m.intercept,
            stats: m.stats.as_ref().map(|s| StatsFile {
                n: s.n,
                r_squared: s.r_squared,
                rmse: s.rmse,
                rrmse: s.rrmse,
                adj_r_squared: s.adj_r_squared,
                aic: s.aic,
                degenerate: s.degenerate,
            }),
            provenance: m.provenance.clone(),
        }
    }
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = RegressionError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        let mut m = LinearModel::new(f.predictors, f.coefficients, f.intercept)?;
        m.response = f.response;
        m.provenance = f.provenance;
        m.stats = f.stats.map(|s| FitStats {
            n: s.n,
            r_squared: s.r_squared,
            rmse: s.rmse,
            rrmse: s.rrmse,
            adj_r_squared: s.adj_r_squared,
            aic: s.aic,
            degenerate: s.degenerate,
        });
        Ok(m)
    }
}
