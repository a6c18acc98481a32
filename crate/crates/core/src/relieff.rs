//! RReliefF attribute quality estimation for regression targets.
//!
//! For `m` sampled instances, the `k` nearest neighbours (range-normalized
//! Manhattan distance, categorical mismatch counting 1) contribute with
//! rank weights `exp(-(rank / sigma)^2)`, normalized over the `k`
//! neighbours. Three accumulators collect how often the target differs
//! (`N_dC`), each attribute differs (`N_dA`), and both differ together
//! (`N_dCdA`); the weight of attribute `A` is
//!
//! ```text
//! w(A) = N_dCdA(A) / N_dC - (N_dA(A) - N_dCdA(A)) / (m - N_dC)
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RReliefFConfig {
    /// Number of sampled instances.
    pub m: usize,
    /// Number of nearest neighbours per instance.
    pub k: usize,
    /// Scale of the rank weighting.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for RReliefFConfig {
    fn default() -> Self {
        RReliefFConfig {
            m: 1000,
            k: 10,
            sigma: 20.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub attributes: Vec<String>,
    pub weights: Vec<f64>,
    pub n_dc: f64,
    pub n_da: Vec<f64>,
    pub n_dc_da: Vec<f64>,
    pub m: usize,
    /// Set when the target never differs between neighbours, in which case
    /// every weight is reported as 0.
    pub degenerate_target: bool,
}

/// Instances visited by the outer loop: a permutation of all rows when
/// `m == n`, otherwise `m` draws with replacement.
pub fn sample_instances(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    if m == n {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    } else {
        (0..m).map(|_| rng.gen_range(0..n)).collect()
    }
}

/// Normalized rank weights `d(i, j)` for ranks `1..=k`.
pub fn rank_weights(k: usize, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k).map(|r| (-(r as f64 / sigma).powi(2)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|d| d / total).collect()
}

struct Diff<'a> {
    data: &'a Dataset,
    categorical: Vec<bool>,
    range: Vec<f64>,
}

impl Diff<'_> {
    /// Per-attribute difference in [0, 1]; a missing value on either side
    /// counts as a full difference.
    fn attr(&self, a: usize, i: usize, j: usize) -> f64 {
        let (x, y) = (self.data.value(i, a), self.data.value(j, a));
        if x.is_nan() || y.is_nan() {
            1.0
        } else if self.categorical[a] {
            if x == y {
                0.0
            } else {
                1.0
            }
        } else if self.range[a] > 0.0 {
            (x - y).abs() / self.range[a]
        } else {
            0.0
        }
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        (0..self.range.len()).map(|a| self.attr(a, i, j)).sum()
    }
}

fn value_range(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

/// `k` nearest rows to `i` (excluding `i`), closest first; equal distances
/// keep the lower row index first.
fn nearest(diff: &Diff<'_>, i: usize, k: usize) -> Vec<usize> {
    let n = diff.data.n_rows();
    let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (diff.distance(i, j), j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

pub fn rrelieff_weights(data: &Dataset, config: &RReliefFConfig) -> Result<WeightVector> {
    let n = data.n_rows();
    if config.k == 0 || config.m == 0 {
        return Err(Error::Config("m and k must be at least 1".into()));
    }
    if n < config.k + 1 {
        return Err(Error::Config(format!("k = {} needs at least {} rows, have {n}", config.k, config.k + 1)));
    }
    if config.m > n {
        return Err(Error::Config(format!("m = {} exceeds the {n} rows", config.m)));
    }
    if !(config.sigma > 0.0) {
        return Err(Error::Config("sigma must be positive".into()));
    }
    let p = data.n_predictors();
    let diff = Diff {
        data,
        categorical: data.schema().predictors().iter().map(|c| c.kind.is_categorical()).collect(),
        range: data.columns().iter().map(|c| value_range(c)).collect(),
    };
    let target = data.target();
    let target_range = value_range(target);
    let target_diff = |i: usize, j: usize| {
        if target_range > 0.0 {
            (target[i] - target[j]).abs() / target_range
        } else {
            0.0
        }
    };
    let d = rank_weights(config.k, config.sigma);
    let instances = sample_instances(n, config.m, config.seed);

    // One contribution per sampled instance, reduced in sampling order so the
    // result does not depend on the thread count.
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = instances
        .par_iter()
        .map(|&i| {
            let mut dc = 0.0;
            let mut da = vec![0.0; p];
            let mut dcda = vec![0.0; p];
            for (rank, j) in nearest(&diff, i, config.k).into_iter().enumerate() {
                let t = target_diff(i, j);
                dc += t * d[rank];
                for a in 0..p {
                    let x = diff.attr(a, i, j);
                    da[a] += x * d[rank];
                    dcda[a] += t * x * d[rank];
                }
            }
            (dc, da, dcda)
        })
        .collect();

    let mut n_dc = 0.0;
    let mut n_da = vec![0.0; p];
    let mut n_dc_da = vec![0.0; p];
    for (dc, da, dcda) in parts {
        n_dc += dc;
        for a in 0..p {
            n_da[a] += da[a];
            n_dc_da[a] += dcda[a];
        }
    }
    let m = config.m as f64;
    let degenerate_target = n_dc == 0.0;
    let weights = (0..p)
        .map(|a| {
            if degenerate_target {
                return 0.0;
            }
            let rest = m - n_dc;
            let second = if rest > 0.0 { (n_da[a] - n_dc_da[a]) / rest } else { 0.0 };
            n_dc_da[a] / n_dc - second
        })
        .collect();
    Ok(WeightVector {
        attributes: data.schema().predictors().iter().map(|c| c.name.clone()).collect(),
        weights,
        n_dc,
        n_da,
        n_dc_da,
        m: config.m,
        degenerate_target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub index: usize,
    pub name: String,
    pub weight: f64,
}

/// Attributes by descending weight; ties keep schema order.
pub fn rank_features(w: &WeightVector) -> Vec<RankedAttribute> {
    let mut out: Vec<RankedAttribute> = w
        .attributes
        .iter()
        .zip(&w.weights)
        .enumerate()
        .map(|(index, (name, &weight))| RankedAttribute {
            index,
            name: name.clone(),
            weight,
        })
        .collect();
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.index.cmp(&b.index)));
    out
}

/// Attributes whose weight exceeds `threshold`, in ranking order.
pub fn select_features(ranking: &[RankedAttribute], threshold: f64) -> Result<Vec<RankedAttribute>> {
    let kept: Vec<RankedAttribute> = ranking.iter().filter(|r| r.weight > threshold).cloned().collect();
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "no attribute has weight above {threshold}; lower the selection threshold"
        )));
    }
    Ok(kept)
}
