//! Independent reference implementations used by the integration tests and
//! the acceptance suite.

#![allow(dead_code)]

use rand::Rng;
use ridehail::ann::Network;
use ridehail::cart::{Node, RegressionTree, SplitRule, TreeConfig};
use ridehail::data::{ColumnKind, Dataset};
use ridehail::relieff::{sample_instances, RReliefFConfig};
use ridehail::seed;

pub fn rmse(p: &[f64], o: &[f64]) -> f64 {
    (p.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64).sqrt()
}

/// Small dataset with many ties: ordered columns take values in 0..4,
/// categorical columns levels 1..=4, integer targets in 0..6.
pub fn small_case(rng: &mut seed::Rng) -> (Dataset, TreeConfig) {
    let n = rng.gen_range(2..=8);
    let p = rng.gen_range(1..=3);
    let kinds: Vec<ColumnKind> = (0..p)
        .map(|_| match rng.gen_range(0..3) {
            0 => ColumnKind::Continuous,
            1 => ColumnKind::Integer { min: 0, max: 3 },
            _ => ColumnKind::Categorical { min: 1, max: 4 },
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            kinds
                .iter()
                .map(|k| match k {
                    ColumnKind::Continuous => f64::from(rng.gen_range(0..4u8)) * 0.5,
                    ColumnKind::Integer { .. } => f64::from(rng.gen_range(0..4u8)),
                    ColumnKind::Categorical { .. } => f64::from(rng.gen_range(1..=4u8)),
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6u8))).collect();
    let data = Dataset::from_rows(&kinds, &rows, y).unwrap();
    let min_leaf = rng.gen_range(1..=2);
    let config = TreeConfig {
        min_leaf,
        min_branch: rng.gen_range(min_leaf + 1..=4).max(2),
        max_depth: if rng.gen_bool(0.3) { Some(rng.gen_range(1..=3)) } else { None },
        subspace_size: None,
        seed: rng.gen(),
    };
    (data, config)
}

fn sse(y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Best variance reduction over every admissible binary partition of the
/// rows, trying every threshold of ordered columns and every proper subset
/// of the levels of categorical columns.
pub fn exhaustive_best_gain(data: &Dataset, targets: &[f64], rows: &[usize], min_leaf: usize) -> Option<f64> {
    let ys: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
    let parent = sse(&ys);
    let mut best: Option<f64> = None;
    let mut consider = |left: Vec<bool>| {
        let l: Vec<f64> = rows.iter().zip(&left).filter(|(_, &g)| g).map(|(&r, _)| targets[r]).collect();
        let r: Vec<f64> = rows.iter().zip(&left).filter(|(_, &g)| !g).map(|(&r, _)| targets[r]).collect();
        if l.len() < min_leaf || r.len() < min_leaf || l.is_empty() || r.is_empty() {
            return;
        }
        let g = parent - sse(&l) - sse(&r);
        if best.is_none_or(|b| g > b) {
            best = Some(g);
        }
    };
    for (a, col) in data.schema().predictors().iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|&r| data.value(r, a)).collect();
        if col.kind.is_categorical() {
            let mut levels: Vec<i64> = vals.iter().map(|&v| v as i64).collect();
            levels.sort_unstable();
            levels.dedup();
            let l = levels.len();
            for mask in 1..(1u32 << l) - 1 {
                let set: Vec<i64> = (0..l).filter(|&b| mask >> b & 1 == 1).map(|b| levels[b]).collect();
                consider(vals.iter().map(|v| set.contains(&(*v as i64))).collect());
            }
        } else {
            let mut distinct = vals.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            for t in &distinct[..distinct.len().saturating_sub(1)] {
                consider(vals.iter().map(|v| v <= t).collect());
            }
        }
    }
    best
}

fn goes_left(rule: &SplitRule, v: f64) -> bool {
    match rule {
        SplitRule::Continuous { threshold } => v <= *threshold,
        SplitRule::Categorical { left, .. } => left.contains(&(v as i64)),
    }
}

/// Walks the fitted tree and checks every node against the exhaustive
/// search: a split must reach the optimal reduction, a leaf must admit no
/// improving split, and leaf values are node means.
pub fn check_tree_against_oracle(
    tree: &RegressionTree,
    data: &Dataset,
    targets: &[f64],
    config: &TreeConfig,
) -> Result<(), String> {
    let all: Vec<usize> = (0..data.n_rows()).collect();
    let mut stack = vec![(0usize, all, 0usize)];
    while let Some((i, rows, depth)) = stack.pop() {
        let ys: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
        let node_sse = sse(&ys);
        let tol = 1e-9 * node_sse.max(1.0);
        let can_split =
            rows.len() >= config.min_branch && config.max_depth.is_none_or(|d| depth < d) && node_sse > 0.0;
        let oracle = if can_split {
            exhaustive_best_gain(data, targets, &rows, config.min_leaf).filter(|g| *g > tol)
        } else {
            None
        };
        match &tree.nodes()[i] {
            Node::Leaf { value, weight } => {
                if let Some(g) = oracle {
                    return Err(format!("node {i}: leaf but a split gains {g}"));
                }
                let mean = ys.iter().sum::<f64>() / ys.len() as f64;
                if (value - mean).abs() > 1e-12 * mean.abs().max(1.0) || *weight != rows.len() as f64 {
                    return Err(format!("node {i}: leaf value {value} vs mean {mean}"));
                }
            }
            Node::Split {
                attribute,
                rule,
                gain,
                left,
                right,
                ..
            } => {
                let Some(best) = oracle else {
                    return Err(format!("node {i}: split although no admissible split improves"));
                };
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| goes_left(rule, data.value(row, *attribute)));
                let ly: Vec<f64> = l.iter().map(|&x| targets[x]).collect();
                let ry: Vec<f64> = r.iter().map(|&x| targets[x]).collect();
                let achieved = node_sse - sse(&ly) - sse(&ry);
                if (achieved - best).abs() > tol || (gain - best).abs() > tol {
                    return Err(format!("node {i}: reduction {achieved} (reported {gain}) vs optimum {best}"));
                }
                if l.len() < config.min_leaf || r.len() < config.min_leaf {
                    return Err(format!("node {i}: child below min_leaf"));
                }
                stack.push((*left, l, depth + 1));
                stack.push((*right, r, depth + 1));
            }
        }
    }
    Ok(())
}

/// Straight transcription of RReliefF for complete data: Manhattan
/// distance over normalised attribute differences, neighbours ordered by
/// distance then index, rank weights `exp(-(rank/sigma)^2)` normalised.
pub fn relieff_oracle(data: &Dataset, cfg: &RReliefFConfig) -> Vec<f64> {
    let n = data.n_rows();
    let p = data.n_predictors();
    let y = data.target();
    let range = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let ranges: Vec<f64> = (0..p).map(|a| range(data.column(a))).collect();
    let cat: Vec<bool> = data.schema().predictors().iter().map(|c| c.kind.is_categorical()).collect();
    let diff = |a: usize, i: usize, j: usize| -> f64 {
        let (u, v) = (data.value(i, a), data.value(j, a));
        if cat[a] {
            if u != v {
                1.0
            } else {
                0.0
            }
        } else if ranges[a] == 0.0 {
            0.0
        } else {
            (u - v).abs() / ranges[a]
        }
    };
    let yr = range(y);
    let ydiff = |i: usize, j: usize| if yr == 0.0 { 0.0 } else { (y[i] - y[j]).abs() / yr };

    let mut dstar = Vec::new();
    for rank in 1..=cfg.k {
        let q = rank as f64 / cfg.sigma;
        dstar.push((-(q * q)).exp());
    }
    let total: f64 = dstar.iter().sum();

    let mut ndc = 0.0;
    let mut nda = vec![0.0; p];
    let mut ndcda = vec![0.0; p];
    for i in sample_instances(n, cfg.m, cfg.seed) {
        let mut others: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if j != i {
                let mut dist = 0.0;
                for a in 0..p {
                    dist += diff(a, i, j);
                }
                others.push((dist, j));
            }
        }
        others.sort_by(|x, z| x.0.total_cmp(&z.0).then(x.1.cmp(&z.1)));
        for (rank, &(_, j)) in others.iter().take(cfg.k).enumerate() {
            let d = dstar[rank] / total;
            ndc += ydiff(i, j) * d;
            for a in 0..p {
                nda[a] += diff(a, i, j) * d;
                ndcda[a] += ydiff(i, j) * diff(a, i, j) * d;
            }
        }
    }
    let m = cfg.m as f64;
    (0..p)
        .map(|a| {
            if ndc == 0.0 {
                0.0
            } else if m - ndc <= 0.0 {
                ndcda[a] / ndc
            } else {
                ndcda[a] / ndc - (nda[a] - ndcda[a]) / (m - ndc)
            }
        })
        .collect()
}

/// Small dataset for the RReliefF oracle: mixed attribute kinds, n <= 8.
pub fn small_relieff_case(rng: &mut seed::Rng) -> (Dataset, RReliefFConfig) {
    let n = rng.gen_range(2..=8);
    let p = rng.gen_range(1..=4);
    let kinds: Vec<ColumnKind> = (0..p)
        .map(|_| {
            if rng.gen_bool(0.3) {
                ColumnKind::Categorical { min: 0, max: 2 }
            } else {
                ColumnKind::Continuous
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            kinds
                .iter()
                .map(|k| match k {
                    ColumnKind::Categorical { .. } => f64::from(rng.gen_range(0..3u8)),
                    _ => {
                        if rng.gen_bool(0.3) {
                            f64::from(rng.gen_range(0..3u8))
                        } else {
                            rng.gen_range(-5.0..5.0)
                        }
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let data = Dataset::from_rows(&kinds, &rows, y).unwrap();
    let k = rng.gen_range(1..n);
    let cfg = RReliefFConfig {
        m: rng.gen_range(1..=n),
        k,
        sigma: rng.gen_range(0.5..25.0),
        seed: rng.gen(),
    };
    (data, cfg)
}

/// Forward pass as explicit matrix products: `h = sigmoid(W h + b)` for the
/// hidden layers, `max(0, W h + b)` at the output.
pub fn forward_oracle(net: &Network, x: &[f64]) -> f64 {
    let mut h = x.to_vec();
    let last = net.layers.len() - 1;
    for (k, l) in net.layers.iter().enumerate() {
        let mut z = l.biases.clone();
        for o in 0..l.n_out {
            for i in 0..l.n_in {
                z[o] += l.weights[o * l.n_in + i] * h[i];
            }
        }
        h = if k < last { z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect() } else { z };
    }
    h[0].max(0.0)
}

/// Largest relative error between backprop and central differences over
/// every parameter.
pub fn gradient_check(net: &mut Network, x: &[f64], y: &[f64], eps: f64) -> f64 {
    let (_, g) = net.loss_and_gradient(x, y, None);
    let g = g.flat();
    let p = net.params();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] = p[i] + eps;
        net.set_params(&q);
        let up = net.loss_and_gradient(x, y, None).0;
        q[i] = p[i] - eps;
        net.set_params(&q);
        let down = net.loss_and_gradient(x, y, None).0;
        let fd = (up - down) / (2.0 * eps);
        let scale = fd.abs().max(g[i].abs());
        if scale > 1e-7 {
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    net.set_params(&p);
    worst
}

/// Random network with the output pre-activation kept positive on the
/// unit cube so the clip is differentiable everywhere on the batch.
pub fn random_network(rng: &mut seed::Rng) -> (Network, Vec<f64>, Vec<f64>) {
    let n_in = rng.gen_range(2..=6);
    let sizes = [n_in, rng.gen_range(2..=6), rng.gen_range(2..=5), 1];
    let mut net = Network::init(&sizes, rng);
    let out = net.layers.last_mut().unwrap();
    out.biases[0] = out.weights.iter().map(|w| w.abs()).sum::<f64>() + 0.5;
    let x: Vec<f64> = (0..10 * n_in).map(|_| rng.gen_range(0.0..1.0)).collect();
    let y: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..3.0)).collect();
    (net, x, y)
}
