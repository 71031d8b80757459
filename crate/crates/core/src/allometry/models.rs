use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{AllometryError, SpeciesCode};

const DEFAULT_TABLE: &str = include_str!("species.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DbhModel {
    Quadratic { a: f64, b: f64, c: f64 },
    Power { a: f64, b: f64 },
    Exp { a: f64, b: f64 },
}

impl DbhModel {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            DbhModel::Quadratic { a, b, c } => a * h * h + b * h + c,
            DbhModel::Power { a, b } => a * h.powf(b),
            DbhModel::Exp { a, b } => a * (b * h).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BiomassTerm {
    D2hPower {
        a: f64,
        b: f64,
    },
    DPower {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Shifted {
        a: f64,
        shift: f64,
        b: f64,
    },
}

fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

impl BiomassTerm {
    pub fn eval(&self, d: f64, h: f64) -> f64 {
        match *self {
            BiomassTerm::D2hPower { a, b } => a * pow(d * d * h, b),
            BiomassTerm::DPower { a, b, c } => a * pow(d, b) + c,
            BiomassTerm::Shifted { a, shift, b } => a * pow(d + shift, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesModel {
    /// Source row label, carried into outputs as the formula id.
    pub row: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub dbh: DbhModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<BiomassTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BiomassTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<BiomassTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pod: Option<BiomassTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<BiomassTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MassUnit {
    #[default]
    Kg,
    T,
}

impl MassUnit {
    pub fn tonnes_per_unit(self) -> f64 {
        match self {
            MassUnit::Kg => 1e-3,
            MassUnit::T => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MassUnit::Kg => "kg",
            MassUnit::T => "t",
        }
    }
}

/// Biomass of one tree, in the table's mass unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AgbComponents {
    pub stem: Option<f64>,
    pub branch: Option<f64>,
    pub leaf: Option<f64>,
    pub pod: Option<f64>,
    pub total: f64,
    pub dbh_used: f64,
    pub formula_id: String,
    /// Components whose printed value was negative and got clamped to 0.
    pub clamped: Vec<&'static str>,
}

impl AgbComponents {
    pub fn parts(&self) -> [(&'static str, Option<f64>); 4] {
        [("stem", self.stem), ("branch", self.branch), ("leaf", self.leaf), ("pod", self.pod)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTable {
    #[serde(default)]
    pub mass_unit: MassUnit,
    pub species: BTreeMap<SpeciesCode, SpeciesModel>,
}

impl Default for ModelTable {
    fn default() -> Self {
        ModelTable::from_toml_str(DEFAULT_TABLE).expect("embedded species table parses")
    }
}

impl ModelTable {
    /// The embedded table as TOML text, for export and editing.
    pub fn default_toml() -> &'static str {
        DEFAULT_TABLE
    }

    pub fn from_toml_str(s: &str) -> Result<Self, AllometryError> {
        let t: ModelTable = toml::from_str(s).map_err(|e| AllometryError::ModelTable(e.to_string()))?;
        for (code, m) in &t.species {
            if m.total.is_none() && [m.stem, m.branch, m.leaf, m.pod].iter().all(Option::is_none) {
                return Err(AllometryError::ModelTable(format!("{code} has neither components nor a total")));
            }
        }
        Ok(t)
    }

    /// Embedded defaults with every species listed in `path` replaced.
    pub fn with_overrides(path: &Path) -> Result<Self, AllometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AllometryError::ModelTable(format!("{}: {e}", path.display())))?;
        let over = ModelTable::from_toml_str(&text)?;
        let mut t = ModelTable::default();
        t.mass_unit = over.mass_unit;
        t.species.extend(over.species);
        Ok(t)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model table serializes")
    }

    pub fn model(&self, s: SpeciesCode) -> Result<&SpeciesModel, AllometryError> {
        self.species.get(&s).ok_or(AllometryError::NoModel(s))
    }

    pub fn dbh_from_height(&self, s: SpeciesCode, height: f64) -> Result<f64, AllometryError> {
        if !(height > 0.0) || !height.is_finite() {
            return Err(AllometryError::Domain(format!("height {height} must be positive")));
        }
        Ok(self.model(s)?.dbh.eval(height))
    }

    pub fn tree_agb(&self, s: SpeciesCode, height: f64, dbh_override: Option<f64>) -> Result<AgbComponents, AllometryError> {
        let m = self.model(s)?;
        let d = match dbh_override {
            Some(d) if !(d > 0.0) || !d.is_finite() => {
                return Err(AllometryError::Domain(format!("dbh {d} must be positive")))
            }
            Some(d) => {
                if !(height > 0.0) || !height.is_finite() {
                    return Err(AllometryError::Domain(format!("height {height} must be positive")));
                }
                d
            }
            None => self.dbh_from_height(s, height)?,
        };
        let mut clamped = Vec::new();
        let mut eval = |name: &'static str, t: Option<BiomassTerm>| {
            t.map(|t| {
                let w = t.eval(d, height);
                if w < 0.0 {
                    clamped.push(name);
                    0.0
                } else {
                    w
                }
            })
        };
        let stem = eval("stem", m.stem);
        let branch = eval("branch", m.branch);
        let leaf = eval("leaf", m.leaf);
        let pod = eval("pod", m.pod);
        let total = match eval("total", m.total) {
            Some(t) => t,
            None => [stem, branch, leaf, pod].iter().flatten().sum(),
        };
        if !clamped.is_empty() {
            warn!("{s} tree at H={height}, D={d:.3}: negative {} clamped to 0", clamped.join(", "));
        }
        Ok(AgbComponents {
            stem,
            branch,
            leaf,
            pod,
            total,
            dbh_used: d,
            formula_id: m.row.clone(),
            clamped,
        })
    }
}
