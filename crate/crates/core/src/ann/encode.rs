//! Input encoding for the network.
//!
//! Categorical and integer columns become fixed-width binary bit vectors,
//! most significant bit first, with width taken from the schema's maximum
//! code. Continuous columns are min-max scaled to `[0, 1]` with the bounds
//! fitted on the training rows. Missing values encode as all zeros.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset, Schema};
use crate::error::{Error, Result};

/// Number of bits needed to write `max` in binary (at least 1).
pub fn bit_width(max: u64) -> usize {
    (64 - max.leading_zeros() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Bits { offset: i64, width: usize },
    MinMax { min: f64, max: f64 },
}

impl ColumnEncoding {
    pub fn width(&self) -> usize {
        match self {
            ColumnEncoding::Bits { width, .. } => *width,
            ColumnEncoding::MinMax { .. } => 1,
        }
    }

    /// Writes the encoding of `v` into `out`; returns true when the value
    /// had to be clamped.
    fn encode(&self, v: f64, out: &mut [f64]) -> bool {
        if v.is_nan() {
            out.fill(0.0);
            return false;
        }
        match *self {
            ColumnEncoding::Bits { offset, width } => {
                let top = (1u64 << width) - 1;
                let raw = v.round() - offset as f64;
                let clamped = raw < 0.0 || raw > top as f64;
                let code = raw.clamp(0.0, top as f64) as u64;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = ((code >> (width - 1 - k)) & 1) as f64;
                }
                clamped
            }
            ColumnEncoding::MinMax { min, max } => {
                let span = max - min;
                let s = if span > 0.0 { (v - min) / span } else { 0.0 };
                out[0] = s.clamp(0.0, 1.0);
                !(0.0..=1.0).contains(&s)
            }
        }
    }
}

/// Per-column encodings plus a running count of clamped values.
#[derive(Debug, Serialize, Deserialize)]
pub struct InputEncoder {
    pub columns: Vec<ColumnEncoding>,
    #[serde(skip)]
    clamped: AtomicUsize,
}

impl Clone for InputEncoder {
    fn clone(&self) -> Self {
        InputEncoder {
            columns: self.columns.clone(),
            clamped: AtomicUsize::new(self.clamped()),
        }
    }
}

impl PartialEq for InputEncoder {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
    }
}

impl InputEncoder {
    /// Derives the encoding from the schema, fitting continuous bounds on
    /// `train`.
    pub fn fit(train: &Dataset) -> Result<Self> {
        Self::fit_schema(train.schema(), |j| {
            let col = train.column(j);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in col.iter().filter(|v| !v.is_nan()) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        })
    }

    /// Builds an encoder with explicit continuous bounds from `bounds(j)`.
    pub fn fit_schema(schema: &Schema, mut bounds: impl FnMut(usize) -> (f64, f64)) -> Result<Self> {
        let mut columns = Vec::with_capacity(schema.n_predictors());
        for (j, c) in schema.predictors().iter().enumerate() {
            columns.push(match c.kind {
                ColumnKind::Categorical { min, max } | ColumnKind::Integer { min, max } => {
                    let offset = min.min(0);
                    let top = max - offset;
                    if top >= 1 << 32 {
                        return Err(Error::Schema(format!("column `{}` range too wide to encode", c.name)));
                    }
                    ColumnEncoding::Bits {
                        offset,
                        width: bit_width(top as u64),
                    }
                }
                ColumnKind::Continuous => {
                    let (min, max) = bounds(j);
                    ColumnEncoding::MinMax { min, max }
                }
            });
        }
        Ok(InputEncoder {
            columns,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    /// Total number of values clamped since construction.
    pub fn clamped(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn encode_row(&self, row: &[f64], out: &mut [f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match encoder");
        assert_eq!(out.len(), self.width(), "output width does not match encoder");
        let mut pos = 0;
        let mut clamped = 0;
        for (c, &v) in self.columns.iter().zip(row) {
            let w = c.width();
            clamped += usize::from(c.encode(v, &mut out[pos..pos + w]));
            pos += w;
        }
        if clamped > 0 {
            self.clamped.fetch_add(clamped, Ordering::Relaxed);
        }
    }

    pub fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.encode_row(row, &mut out);
        out
    }

    /// Row-major matrix of encoded rows.
    pub fn encode_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.n_predictors() != self.columns.len() {
            return Err(Error::Input(format!(
                "dataset has {} predictors, encoder expects {}",
                data.n_predictors(),
                self.columns.len()
            )));
        }
        let w = self.width();
        let mut out = vec![0.0; data.n_rows() * w];
        let mut row = Vec::new();
        for i in 0..data.n_rows() {
            data.row_into(i, &mut row);
            self.encode_row(&row, &mut out[i * w..(i + 1) * w]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn district_bits() {
        let schema = Schema::slot_table(66);
        let enc = InputEncoder::fit_schema(&schema, |_| (0.0, 1.0)).unwrap();
        assert_eq!(enc.columns[0], ColumnEncoding::Bits { offset: 0, width: 7 });
        let mut out = [0.0; 7];
        assert!(!enc.columns[0].encode(5.0, &mut out));
        assert_eq!(out, [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        // district 7 + slot 8 + dow 3 + destinations 7 + 12 continuous + weather 4 + 2 continuous
        assert_eq!(enc.width(), 43);
    }

    #[test]
    fn min_max_scaling_and_clamping() {
        let e = ColumnEncoding::MinMax { min: 2.0, max: 6.0 };
        let mut out = [0.0];
        assert!(!e.encode(2.0, &mut out));
        assert_eq!(out[0], 0.0);
        assert!(!e.encode(6.0, &mut out));
        assert_eq!(out[0], 1.0);
        assert!(!e.encode(3.0, &mut out));
        assert_eq!(out[0], 0.25);
        assert!(e.encode(9.0, &mut out));
        assert_eq!(out[0], 1.0);
        assert!(!e.encode(f64::NAN, &mut out));
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn clamps_are_counted() {
        let kinds = [ColumnKind::Continuous, ColumnKind::Integer { min: 0, max: 3 }];
        let rows = vec![vec![0.0, 1.0], vec![10.0, 3.0]];
        let data = Dataset::from_rows(&kinds, &rows, vec![0.0, 1.0]).unwrap();
        let enc = InputEncoder::fit(&data).unwrap();
        assert_eq!(enc.width(), 3);
        assert_eq!(enc.encode(&[5.0, 2.0]), vec![0.5, 1.0, 0.0]);
        assert_eq!(enc.clamped(), 0);
        assert_eq!(enc.encode(&[-5.0, 2.0]), vec![0.0, 1.0, 0.0]);
        assert_eq!(enc.encode(&[20.0, 9.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(enc.clamped(), 3);
    }
}
