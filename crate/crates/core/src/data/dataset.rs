use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schema::{self, Column, ColumnKind, Schema};
use crate::error::{Error, Result};

pub const SLOTS_PER_DAY: u32 = 144;

/// Identifies one (district, 10-minute slot) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotKey {
    pub district_id: u32,
    pub day_index: u32,
    pub slot_of_day: u32,
    pub dow: u32,
}

impl SlotKey {
    /// `start_dow` is the day of week (1..=7) of day 0.
    pub fn new(district_id: u32, day_index: u32, slot_of_day: u32, start_dow: u32) -> Self {
        SlotKey {
            district_id,
            day_index,
            slot_of_day,
            dow: dow_of(day_index, start_dow),
        }
    }
}

pub fn dow_of(day_index: u32, start_dow: u32) -> u32 {
    (start_dow - 1 + day_index) % 7 + 1
}

/// Slot of day for a wall-clock time.
pub fn encode_time_of_day(hour: u32, minute: u32) -> Result<u32> {
    if hour > 23 || minute > 59 {
        return Err(Error::Input(format!("time {hour:02}:{minute:02} out of range")));
    }
    Ok(hour * 6 + minute / 10)
}

/// One aggregated slot with the nineteen predictors and the demand target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub key: SlotKey,
    pub demand: f64,
    pub destinations: f64,
    pub price_avg: f64,
    pub price_median: f64,
    pub price_min: f64,
    pub price_max: f64,
    pub tj_level: [f64; 4],
    pub tj_global: [f64; 4],
    pub weather: f64,
    pub temperature: f64,
    pub pm25: f64,
}

impl SlotRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.demand < 0.0 {
            return Err("negative demand".into());
        }
        if self.destinations < 1.0 {
            return Err("destinations must be at least 1".into());
        }
        if self.price_min > self.price_max {
            return Err("price-min exceeds price-max".into());
        }
        for shares in [&self.tj_level, &self.tj_global] {
            if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err("LoS share outside [0, 1]".into());
            }
            if shares.iter().sum::<f64>() > 1.0 + 1e-6 {
                return Err("LoS shares sum above 1".into());
            }
        }
        if self.pm25 < 0.0 {
            return Err("negative PM2.5".into());
        }
        Ok(())
    }

    /// Predictor values in [`Schema::slot_table`] order.
    pub fn predictor_values(&self) -> [f64; 19] {
        let mut v = [0.0; 19];
        v[0] = f64::from(self.key.district_id);
        v[1] = f64::from(self.key.slot_of_day);
        v[2] = f64::from(self.key.dow);
        v[3] = self.destinations;
        v[4] = self.price_avg;
        v[5] = self.price_median;
        v[6] = self.price_min;
        v[7] = self.price_max;
        v[8..12].copy_from_slice(&self.tj_level);
        v[12..16].copy_from_slice(&self.tj_global);
        v[16] = self.weather;
        v[17] = self.temperature;
        v[18] = self.pm25;
        v
    }
}

/// Column-major table of predictor values with a target column.
///
/// Missing predictor values are `NaN`. Immutable after construction; clones
/// share the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    day_index: Vec<u32>,
}

impl Dataset {
    /// Builds and validates a dataset from predictor columns.
    pub fn from_columns(
        schema: Schema,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        day_index: Option<Vec<u32>>,
    ) -> Result<Self> {
        Self::from_parts(Arc::new(schema), columns, target, day_index)
    }

    fn from_parts(
        schema: Arc<Schema>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        day_index: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = target.len();
        if columns.len() != schema.n_predictors() {
            return Err(Error::Schema(format!(
                "{} columns supplied for {} predictors",
                columns.len(),
                schema.n_predictors()
            )));
        }
        for (c, col) in schema.predictors().iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, target has {n}",
                    c.name,
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                c.kind.check(v).map_err(|message| Error::Record {
                    index: i,
                    message: format!("column `{}`: {message}", c.name),
                })?;
            }
        }
        if let Some(i) = target.iter().position(|y| !y.is_finite()) {
            return Err(Error::Record {
                index: i,
                message: format!("target `{}` is not finite", schema.target()),
            });
        }
        let day_index = day_index.unwrap_or_else(|| vec![0; n]);
        if day_index.len() != n {
            return Err(Error::Schema("day index length mismatch".into()));
        }
        Ok(Dataset {
            schema,
            columns,
            target,
            day_index,
        })
    }

    /// Builds a dataset from row vectors, naming the predictors `x0`, `x1`, ...
    /// and the target `y`.
    pub fn from_rows(kinds: &[ColumnKind], rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let cols = kinds
            .iter()
            .enumerate()
            .map(|(j, k)| Column::new(&format!("x{j}"), *k, ""))
            .collect();
        let schema = Schema::new(cols, "y")?;
        let mut columns = vec![Vec::with_capacity(rows.len()); kinds.len()];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != kinds.len() {
                return Err(Error::Record {
                    index: i,
                    message: format!("{} values for {} columns", r.len(), kinds.len()),
                });
            }
            for (c, v) in columns.iter_mut().zip(r) {
                c.push(*v);
            }
        }
        Dataset::from_columns(schema, columns, target, None)
    }

    /// Builds a slot-table dataset from aggregated records.
    pub fn from_records(n_districts: usize, records: &[SlotRecord]) -> Result<Self> {
        let schema = Schema::slot_table(n_districts);
        let mut columns = vec![Vec::with_capacity(records.len()); 19];
        let mut target = Vec::with_capacity(records.len());
        let mut days = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.validate()
                .map_err(|message| Error::Record { index: i, message })?;
            for (col, v) in columns.iter_mut().zip(r.predictor_values()) {
                col.push(v);
            }
            target.push(r.demand);
            days.push(r.key.day_index);
        }
        Dataset::from_columns(schema, columns, target, Some(days))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_predictors(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn day_index(&self) -> &[u32] {
        &self.day_index
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.columns.iter().map(|c| c[i]));
    }

    /// Rows in the given order (duplicates allowed).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            day_index: rows.iter().map(|&i| self.day_index[i]).collect(),
        }
    }

    /// Keeps only the named predictors.
    pub fn select_predictors(&self, names: &[&str]) -> Result<Dataset> {
        let schema = self.schema.select(names)?;
        let columns = names
            .iter()
            .map(|n| self.columns[self.schema.index_of(n).expect("checked by select")].clone())
            .collect();
        Ok(Dataset {
            schema: Arc::new(schema),
            columns,
            target: self.target.clone(),
            day_index: self.day_index.clone(),
        })
    }

    /// True when `other` has the same predictor columns and target.
    pub fn same_schema(&self, other: &Dataset) -> bool {
        Arc::ptr_eq(&self.schema, &other.schema) || *self.schema == *other.schema
    }

    /// Slot keys for every row, read from the district, time-of-day and dow
    /// columns.
    pub fn slot_keys(&self) -> Result<Vec<SlotKey>> {
        let col = |name: &str| {
            self.schema
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
        };
        let (d, t, w) = (col(schema::DISTRICT)?, col(schema::TIME_OF_DAY)?, col(schema::DOW)?);
        Ok((0..self.n_rows())
            .map(|i| SlotKey {
                district_id: self.columns[d][i] as u32,
                day_index: self.day_index[i],
                slot_of_day: self.columns[t][i] as u32,
                dow: self.columns[w][i] as u32,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_of_day_encoding() {
        assert_eq!(encode_time_of_day(0, 0).unwrap(), 0);
        assert_eq!(encode_time_of_day(23, 59).unwrap(), 143);
        assert_eq!(encode_time_of_day(7, 35).unwrap(), 45);
        assert!(encode_time_of_day(24, 0).is_err());
        assert!(encode_time_of_day(3, 60).is_err());
    }

    #[test]
    fn dow_wraps() {
        assert_eq!(dow_of(0, 5), 5);
        assert_eq!(dow_of(2, 6), 1);
        assert_eq!(dow_of(7, 3), 3);
    }

    #[test]
    fn out_of_range_category_rejected() {
        let schema = Schema::slot_table(2);
        let mut cols = vec![vec![1.0]; 19];
        cols[0] = vec![3.0];
        let err = Dataset::from_columns(schema, cols, vec![0.0], None).unwrap_err();
        assert!(matches!(err, Error::Record { index: 0, .. }));
    }
}
