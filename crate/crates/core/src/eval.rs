//! Prediction quality metrics and error breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SlotKey;
use crate::error::{Error, Result};

fn check_pair(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} observations",
            pred.len(),
            obs.len()
        )));
    }
    if obs.is_empty() {
        return Err(Error::Input("no observations".into()));
    }
    Ok(())
}

/// Root mean squared error, not normalized.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_pair(pred, obs)?;
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((sse / obs.len() as f64).sqrt())
}

/// Least-squares line of predictions on observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterFit {
    pub slope: f64,
    pub intercept: f64,
    /// Squared Pearson correlation between predictions and observations.
    pub r_square: f64,
    /// Coefficient of determination of the predictions, `1 - SSE / SST`.
    pub r_square_cod: f64,
}

pub fn fit_scatter(pred: &[f64], obs: &[f64]) -> Result<ScatterFit> {
    check_pair(pred, obs)?;
    if obs.len() < 2 {
        return Err(Error::Input("a scatter fit needs at least two points".into()));
    }
    let n = obs.len() as f64;
    let mx = obs.iter().sum::<f64>() / n;
    let my = pred.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy, mut sse) = (0.0, 0.0, 0.0, 0.0);
    for (&y, &x) in pred.iter().zip(obs) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
        sse += (x - y) * (x - y);
    }
    if sxx == 0.0 {
        return Err(Error::Input("observations are constant; slope and R-square are undefined".into()));
    }
    let slope = sxy / sxx;
    let r_square = if sxy == 0.0 {
        0.0
    } else if sxy * sxy == sxx * syy {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(ScatterFit {
        slope,
        intercept: my - slope * mx,
        r_square,
        r_square_cod: 1.0 - sse / sxx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Input("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    Ok(Summary {
        mean,
        sd: var.sqrt(),
        median,
        min: sorted[0],
        max: sorted[k - 1],
    })
}

/// Running sums of the ascending-sorted values; the last point is the total.
pub fn cumulative_distribution(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    sorted
        .into_iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    District,
    SlotOfDay,
    Dow,
}

impl GroupBy {
    pub const ALL: [GroupBy; 3] = [GroupBy::District, GroupBy::SlotOfDay, GroupBy::Dow];

    pub fn key(self, k: &SlotKey) -> u32 {
        match self {
            GroupBy::District => k.district_id,
            GroupBy::SlotOfDay => k.slot_of_day,
            GroupBy::Dow => k.dow,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupBy::District => "district",
            GroupBy::SlotOfDay => "slot_of_day",
            GroupBy::Dow => "dow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRmse {
    pub key: u32,
    pub n: usize,
    pub rmse: f64,
    /// Sum of the group RMSEs up to and including this key.
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedRmse {
    pub group_by: GroupBy,
    pub groups: Vec<GroupRmse>,
}

impl GroupedRmse {
    /// `sum_g n_g * rmse_g^2`, which equals `n * rmse^2` over all rows.
    pub fn pooled_sse(&self) -> f64 {
        self.groups.iter().map(|g| g.n as f64 * g.rmse * g.rmse).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},n,rmse,cumulative_rmse\n", self.group_by.name());
        for g in &self.groups {
            let _ = writeln!(out, "{},{},{},{}", g.key, g.n, g.rmse, g.cumulative);
        }
        out
    }
}

/// RMSE within each group, in ascending key order. Groups without rows do
/// not appear.
pub fn grouped_rmse(pred: &[f64], obs: &[f64], keys: &[SlotKey], group_by: GroupBy) -> Result<GroupedRmse> {
    check_pair(pred, obs)?;
    if keys.len() != obs.len() {
        return Err(Error::Input(format!("{} keys for {} observations", keys.len(), obs.len())));
    }
    let mut acc: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for ((p, o), k) in pred.iter().zip(obs).zip(keys) {
        let e = acc.entry(group_by.key(k)).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += (p - o) * (p - o);
    }
    let mut running = 0.0;
    let groups = acc
        .into_iter()
        .map(|(key, (n, sse))| {
            let rmse = (sse / n as f64).sqrt();
            running += rmse;
            GroupRmse {
                key,
                n,
                rmse,
                cumulative: running,
            }
        })
        .collect();
    Ok(GroupedRmse { group_by, groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n: usize,
    pub rmse: f64,
    pub scatter: ScatterFit,
    pub predicted: Summary,
    pub observed: Summary,
    pub grouped: Vec<GroupedRmse>,
    /// Largest relative gap between `n * rmse^2` and the pooled group sums.
    pub pooling_residual: f64,
}

pub fn evaluate(model: &str, pred: &[f64], obs: &[f64], keys: &[SlotKey]) -> Result<EvalReport> {
    let rmse = rmse(pred, obs)?;
    let grouped = GroupBy::ALL
        .iter()
        .map(|&g| grouped_rmse(pred, obs, keys, g))
        .collect::<Result<Vec<_>>>()?;
    let total = obs.len() as f64 * rmse * rmse;
    let pooling_residual = grouped
        .iter()
        .map(|g| (g.pooled_sse() - total).abs() / total.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(EvalReport {
        model: model.to_string(),
        n: obs.len(),
        rmse,
        scatter: fit_scatter(pred, obs)?,
        predicted: summary_stats(pred)?,
        observed: summary_stats(obs)?,
        grouped,
        pooling_residual,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<dir>/report.json` and one `rmse_by_<group>.csv` per grouping.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))?;
        for g in &self.grouped {
            let path = dir.join(format!("rmse_by_{}.csv", g.group_by.name()));
            std::fs::write(&path, g.to_csv()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn summary_cells(s: &Summary) -> String {
    format!("{:.2}, {:.2}, {:.1}, {:.0}, {:.0}", s.mean, s.sd, s.median, s.min, s.max)
}

/// Observed-versus-predicted comparison, one row per model plus the
/// observed test set.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("model, r_square, slope, rmse, mean, sd, median, min, max\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}, {:.2}, {:.2}, {:.2}, {}",
            r.model,
            r.scatter.r_square,
            r.scatter.slope,
            r.rmse,
            summary_cells(&r.predicted)
        );
    }
    if let Some(r) = reports.first() {
        let _ = writeln!(out, "observed, , , , {}", summary_cells(&r.observed));
    }
    out
}
