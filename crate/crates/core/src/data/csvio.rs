//! CSV readers and writers for slot tables, raw requests and covariates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::aggregate::{Covariates, RawRequest, TrafficObservation, WeatherObservation};
use super::dataset::Dataset;
use super::schema::Schema;
use crate::error::{Error, Result};

const DAY_INDEX: &str = "day_index";

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file)))
}

/// Writes the slot table: predictors in schema order, the target, then
/// `day_index`.
pub fn write_slot_table(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<&str> = data.schema().predictors().iter().map(|c| c.name.as_str()).collect();
    header.push(data.schema().target());
    header.push(DAY_INDEX);
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..data.n_rows() {
        fields.clear();
        fields.extend(data.columns().iter().map(|c| fmt_value(c[i])));
        fields.push(fmt_value(data.target()[i]));
        fields.push(data.day_index()[i].to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a slot table, matching columns by header name.
///
/// Empty cells and `NA` are read as missing predictor values. Columns not in
/// the schema are ignored, except `day_index`, which is kept when present.
pub fn load_slot_table(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))
    };
    let positions = schema
        .predictors()
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let target_pos = find(schema.target())?;
    let day_pos = headers.iter().position(|h| h == DAY_INDEX);

    let mut columns = vec![Vec::new(); schema.n_predictors()];
    let mut target = Vec::new();
    let mut days = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        let cell = |name: &str, message: String| Error::Cell {
            path: path.to_path_buf(),
            row: line,
            column: name.to_string(),
            message,
        };
        for ((col, &pos), out) in schema.predictors().iter().zip(&positions).zip(columns.iter_mut()) {
            let raw = rec.get(pos).unwrap_or("");
            let v = if raw.is_empty() || raw == "NA" {
                f64::NAN
            } else {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| cell(&col.name, format!("cannot parse `{raw}`")))?;
                col.kind.check(v).map_err(|m| cell(&col.name, m))?;
                v
            };
            out.push(v);
        }
        let raw = rec.get(target_pos).unwrap_or("");
        let y: f64 = raw
            .parse()
            .map_err(|_| cell(schema.target(), format!("cannot parse `{raw}`")))?;
        target.push(y);
        if let Some(p) = day_pos {
            let raw = rec.get(p).unwrap_or("");
            days.push(
                raw.parse::<u32>()
                    .map_err(|_| cell(DAY_INDEX, format!("cannot parse `{raw}`")))?,
            );
        }
    }
    Dataset::from_columns(
        schema.clone(),
        columns,
        target,
        day_pos.map(|_| days),
    )
}

pub fn write_requests(path: &Path, requests: &[RawRequest]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["district_id", "timestamp", "price", "destination_district"])?;
    for r in requests {
        w.write_record(&[
            r.district_id.to_string(),
            fmt_value(r.timestamp),
            fmt_value(r.price),
            r.destination_district.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_requests(path: &Path) -> Result<Vec<RawRequest>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let expected = ["district_id", "timestamp", "price", "destination_district"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema(format!(
            "{}: expected header `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |c: usize| Error::Cell {
            path: path.to_path_buf(),
            row: r + 2,
            column: expected[c].to_string(),
            message: format!("cannot parse `{}`", rec.get(c).unwrap_or("")),
        };
        out.push(RawRequest {
            district_id: rec[0].parse().map_err(|_| parse_err(0))?,
            timestamp: rec[1].parse().map_err(|_| parse_err(1))?,
            price: rec[2].parse().map_err(|_| parse_err(2))?,
            destination_district: rec[3].parse().map_err(|_| parse_err(3))?,
        });
    }
    Ok(out)
}

/// Writes `traffic.csv` and `weather.csv` into `dir`.
pub fn write_covariates(dir: &Path, cov: &Covariates) -> Result<()> {
    let path = dir.join("traffic.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["district_id", "day_index", "slot_of_day", "tj1", "tj2", "tj3", "tj4"])?;
    for t in &cov.traffic {
        let mut row = vec![
            t.district_id.to_string(),
            t.day_index.to_string(),
            t.slot_of_day.to_string(),
        ];
        row.extend(t.shares.iter().map(|&s| fmt_value(s)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("weather.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["day_index", "block", "weather", "temperature", "pm25"])?;
    for o in &cov.weather {
        w.write_record(&[
            o.day_index.to_string(),
            o.block.to_string(),
            o.weather.to_string(),
            fmt_value(o.temperature),
            fmt_value(o.pm25),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads whichever of `traffic.csv` / `weather.csv` exist in `dir`.
pub fn load_covariates(dir: &Path) -> Result<Covariates> {
    let mut cov = Covariates::default();
    let path = dir.join("traffic.csv");
    if path.exists() {
        let mut rdr = reader(&path)?;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |c: usize| Error::Cell {
                path: path.clone(),
                row: r + 2,
                column: c.to_string(),
                message: format!("cannot parse `{}`", rec.get(c).unwrap_or("")),
            };
            let f = |c: usize| rec.get(c).unwrap_or("").parse::<f64>().map_err(|_| bad(c));
            let u = |c: usize| rec.get(c).unwrap_or("").parse::<u32>().map_err(|_| bad(c));
            cov.traffic.push(TrafficObservation {
                district_id: u(0)?,
                day_index: u(1)?,
                slot_of_day: u(2)?,
                shares: [f(3)?, f(4)?, f(5)?, f(6)?],
            });
        }
    }
    let path = dir.join("weather.csv");
    if path.exists() {
        let mut rdr = reader(&path)?;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |c: usize| Error::Cell {
                path: path.clone(),
                row: r + 2,
                column: c.to_string(),
                message: format!("cannot parse `{}`", rec.get(c).unwrap_or("")),
            };
            let f = |c: usize| rec.get(c).unwrap_or("").parse::<f64>().map_err(|_| bad(c));
            let u = |c: usize| rec.get(c).unwrap_or("").parse::<u32>().map_err(|_| bad(c));
            cov.weather.push(WeatherObservation {
                day_index: u(0)?,
                block: u(1)?,
                weather: u(2)?,
                temperature: f(3)?,
                pm25: f(4)?,
            });
        }
    }
    Ok(cov)
}

/// Writes `(name, value)` rows under a two-column header.
pub fn write_pairs(path: &Path, header: [&str; 2], rows: &[(String, f64)]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{},{}", header[0], header[1]).map_err(io)?;
    for (k, v) in rows {
        writeln!(out, "{k},{}", fmt_value(*v)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}
