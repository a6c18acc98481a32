use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a column's values are interpreted.
///
/// Categorical and integer columns hold integral codes stored as `f64`.
/// Learners treat integer columns as ordered, categorical ones as unordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical { min: i64, max: i64 },
    Integer { min: i64, max: i64 },
    Continuous,
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }

    /// Checks a single (non-missing) value against the kind.
    pub fn check(&self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value {value}"));
        }
        match *self {
            ColumnKind::Categorical { min, max } | ColumnKind::Integer { min, max } => {
                if value.fract() != 0.0 {
                    return Err(format!("{value} is not an integer code"));
                }
                if value < min as f64 || value > max as f64 {
                    return Err(format!("{value} outside [{min}, {max}]"));
                }
                Ok(())
            }
            ColumnKind::Continuous => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, kind: ColumnKind, unit: &str) -> Self {
        Column {
            name: name.to_string(),
            kind,
            unit: unit.to_string(),
        }
    }
}

pub const DISTRICT: &str = "district-id";
pub const TIME_OF_DAY: &str = "time-of-day";
pub const DOW: &str = "dow";
pub const DESTINATIONS: &str = "destinations";
pub const PRICE_AVG: &str = "price-avg";
pub const PRICE_MEDIAN: &str = "price-median";
pub const PRICE_MIN: &str = "price-min";
pub const PRICE_MAX: &str = "price-max";
pub const TJ_LEVEL: [&str; 4] = [
    "tj-level-1-m10",
    "tj-level-2-m10",
    "tj-level-3-m10",
    "tj-level-4-m10",
];
pub const TJ_GLOBAL: [&str; 4] = [
    "tj-global-level-1-m10",
    "tj-global-level-2-m10",
    "tj-global-level-3-m10",
    "tj-global-level-4-m10",
];
pub const WEATHER: &str = "weather-m180";
pub const TEMPERATURE: &str = "temperature-m180";
pub const PM25: &str = "PM2.5-m180";
pub const DEMAND: &str = "demand";

/// Ordered predictor columns plus the name of the target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    predictors: Vec<Column>,
    target: String,
}

impl Schema {
    pub fn new(predictors: Vec<Column>, target: &str) -> Result<Self> {
        if predictors.is_empty() {
            return Err(Error::Schema("at least one predictor column is required".into()));
        }
        let mut names: Vec<&str> = predictors.iter().map(|c| c.name.as_str()).collect();
        names.push(target);
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate column `{}`", w[0])));
        }
        for c in &predictors {
            if let ColumnKind::Categorical { min, max } | ColumnKind::Integer { min, max } = c.kind {
                if min > max {
                    return Err(Error::Schema(format!("column `{}` has empty range", c.name)));
                }
            }
        }
        Ok(Schema {
            predictors,
            target: target.to_string(),
        })
    }

    /// The 19-predictor slot table for a city with `n_districts` districts.
    pub fn slot_table(n_districts: usize) -> Self {
        let nd = n_districts.max(1) as i64;
        let mut cols = vec![
            Column::new(DISTRICT, ColumnKind::Categorical { min: 1, max: nd }, "id"),
            Column::new(TIME_OF_DAY, ColumnKind::Integer { min: 0, max: 143 }, "slot"),
            Column::new(DOW, ColumnKind::Categorical { min: 1, max: 7 }, "day"),
            Column::new(DESTINATIONS, ColumnKind::Integer { min: 1, max: nd }, "count"),
            Column::new(PRICE_AVG, ColumnKind::Continuous, "mu"),
            Column::new(PRICE_MEDIAN, ColumnKind::Continuous, "mu"),
            Column::new(PRICE_MIN, ColumnKind::Continuous, "mu"),
            Column::new(PRICE_MAX, ColumnKind::Continuous, "mu"),
        ];
        for name in TJ_LEVEL.iter().chain(TJ_GLOBAL.iter()) {
            cols.push(Column::new(name, ColumnKind::Continuous, "share"));
        }
        cols.push(Column::new(WEATHER, ColumnKind::Categorical { min: 0, max: 9 }, "index"));
        cols.push(Column::new(TEMPERATURE, ColumnKind::Continuous, "degC"));
        cols.push(Column::new(PM25, ColumnKind::Continuous, "ug/m3"));
        Schema::new(cols, DEMAND).expect("slot table schema is well formed")
    }

    pub fn predictors(&self) -> &[Column] {
        &self.predictors
    }

    pub fn n_predictors(&self) -> usize {
        self.predictors.len()
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn kinds(&self) -> Vec<ColumnKind> {
        self.predictors.iter().map(|c| c.kind).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.predictors.iter().position(|c| c.name == name)
    }

    /// A schema restricted to the named predictors, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Schema> {
        let cols = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .map(|i| self.predictors[i].clone())
                    .ok_or_else(|| Error::Schema(format!("unknown predictor `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(cols, &self.target)
    }
}
