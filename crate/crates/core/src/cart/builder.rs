use rand::seq::index;

use super::{Node, RegressionTree, SplitRule, TreeConfig};
use crate::data::{ColumnKind, Dataset};
use crate::seed;

/// Per-column row orders, sorted once per dataset and shared by every tree
/// fitted on it. Missing values sort last; ties keep row order.
#[derive(Debug, Clone)]
pub struct Presorted {
    orders: Vec<Option<Vec<u32>>>,
}

impl Presorted {
    pub fn new(data: &Dataset) -> Self {
        let orders = data
            .schema()
            .predictors()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if c.kind.is_categorical() {
                    return None;
                }
                let col = data.column(j);
                let mut order: Vec<u32> = (0..col.len() as u32).collect();
                order.sort_by(|&a, &b| {
                    let (x, y) = (col[a as usize], col[b as usize]);
                    x.is_nan()
                        .cmp(&y.is_nan())
                        .then(x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal))
                        .then(a.cmp(&b))
                });
                Some(order)
            })
            .collect();
        Presorted { orders }
    }
}

struct Candidate {
    attribute: usize,
    gain: f64,
    rule: SplitRule,
    missing_left: bool,
    weight_left: f64,
    weight_right: f64,
}

// Relative tolerances: a node is pure when its SSE is negligible next to its
// energy, and a split must beat the incumbent by more than rounding noise.
const PURE_REL: f64 = 1e-14;
const GAIN_REL: f64 = 1e-12;
/// Largest level count searched exhaustively under a leaf-size bound.
const MAX_EXHAUSTIVE_LEVELS: usize = 12;

struct Totals {
    weight: f64,
    mean: f64,
    sse: f64,
    min: f64,
    max: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    kinds: Vec<ColumnKind>,
    targets: &'a [f64],
    counts: &'a [u32],
    config: &'a TreeConfig,
    /// Row buffer in ascending row order (used for categorical columns and
    /// node totals) followed by one sorted buffer per ordered column.
    rows: Vec<u32>,
    sorted: Vec<Option<Vec<u32>>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    rng: seed::Rng,
    nodes: Vec<Node>,
}

pub(crate) fn build(
    data: &Dataset,
    presorted: &Presorted,
    targets: &[f64],
    counts: &[u32],
    config: &TreeConfig,
) -> RegressionTree {
    let active = |r: &u32| counts[*r as usize] > 0;
    let rows: Vec<u32> = (0..data.n_rows() as u32).filter(active).collect();
    let sorted = presorted
        .orders
        .iter()
        .map(|o| o.as_ref().map(|o| o.iter().copied().filter(active).collect()))
        .collect();
    let n_active = rows.len();
    let mut b = Builder {
        data,
        kinds: data.schema().kinds(),
        targets,
        counts,
        config,
        rows,
        sorted,
        goes_left: vec![false; data.n_rows()],
        scratch: Vec::with_capacity(n_active),
        rng: seed::rng(config.seed),
        nodes: Vec::new(),
    };
    b.grow(n_active);
    RegressionTree::from_nodes(data.n_predictors(), b.nodes)
}

fn gain_of(wl: f64, sl: f64, wr: f64, sr: f64, base: f64) -> f64 {
    sl * sl / wl + sr * sr / wr - base
}

impl Builder<'_> {
    fn grow(&mut self, n_active: usize) {
        struct Work {
            node: usize,
            lo: usize,
            hi: usize,
            depth: usize,
        }
        self.nodes.push(Node::Leaf { value: 0.0, weight: 0.0 });
        let mut stack = vec![Work { node: 0, lo: 0, hi: n_active, depth: 0 }];
        while let Some(Work { node, lo, hi, depth }) = stack.pop() {
            let totals = self.totals(lo, hi);
            let leaf = Node::Leaf {
                value: totals.mean.clamp(totals.min, totals.max),
                weight: totals.weight,
            };
            let can_split = totals.weight >= self.config.min_branch as f64
                && self.config.max_depth.is_none_or(|d| depth < d)
                && totals.sse > 0.0;
            let best = if can_split { self.best_split(lo, hi, &totals) } else { None };
            let Some(best) = best else {
                self.nodes[node] = leaf;
                continue;
            };
            let mid = self.partition(lo, hi, &best);
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { value: 0.0, weight: 0.0 });
            let right = self.nodes.len();
            self.nodes.push(Node::Leaf { value: 0.0, weight: 0.0 });
            let unseen_left = best.weight_left >= best.weight_right;
            self.nodes[node] = Node::Split {
                attribute: best.attribute,
                rule: best.rule,
                missing_left: best.missing_left,
                unseen_left,
                gain: best.gain,
                weight: totals.weight,
                left,
                right,
            };
            // Right pushed first so the left subtree is built first.
            stack.push(Work { node: right, lo: mid, hi, depth: depth + 1 });
            stack.push(Work { node: left, lo, hi: mid, depth: depth + 1 });
        }
    }

    fn totals(&self, lo: usize, hi: usize) -> Totals {
        let mut weight = 0.0;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &r in &self.rows[lo..hi] {
            let w = f64::from(self.counts[r as usize]);
            let y = self.targets[r as usize];
            weight += w;
            sum += w * y;
            min = min.min(y);
            max = max.max(y);
        }
        let mean = sum / weight;
        let mut sse = 0.0;
        let mut energy = 0.0;
        for &r in &self.rows[lo..hi] {
            let w = f64::from(self.counts[r as usize]);
            let y = self.targets[r as usize];
            sse += w * (y - mean) * (y - mean);
            energy += w * y * y;
        }
        if min == max || sse <= PURE_REL * energy {
            sse = 0.0;
        }
        Totals { weight, mean, sse, min, max }
    }

    fn candidate_attributes(&mut self) -> Vec<usize> {
        let p = self.data.n_predictors();
        match self.config.subspace_size {
            Some(s) if s < p => {
                let mut attrs = index::sample(&mut self.rng, p, s).into_vec();
                attrs.sort_unstable();
                attrs
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, lo: usize, hi: usize, totals: &Totals) -> Option<Candidate> {
        let attrs = self.candidate_attributes();
        // Centered target sums keep the gain formula well conditioned.
        let mut node_sum = 0.0;
        for &r in &self.rows[lo..hi] {
            node_sum += f64::from(self.counts[r as usize]) * (self.targets[r as usize] - totals.mean);
        }
        let base = node_sum * node_sum / totals.weight;
        let tol = GAIN_REL * totals.sse;
        let mut best: Option<Candidate> = None;
        for a in attrs {
            let cand = match self.kinds[a] {
                ColumnKind::Categorical { min, max } => {
                    self.scan_categorical(a, min, max, lo, hi, totals, node_sum, base)
                }
                _ => self.scan_ordered(a, lo, hi, totals, node_sum, base),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.gain > b.gain + tol) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.gain > tol)
    }

    /// Chooses the better side for the missing-value mass; returns
    /// `(gain, missing_left, weight_left, weight_right)`.
    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        wl: f64,
        sl: f64,
        wr: f64,
        sr: f64,
        wm: f64,
        sm: f64,
        base: f64,
    ) -> Option<(f64, bool, f64, f64)> {
        let min_leaf = self.config.min_leaf as f64;
        if wl <= 0.0 || wr <= 0.0 {
            return None;
        }
        if wm <= 0.0 {
            if wl < min_leaf || wr < min_leaf {
                return None;
            }
            return Some((gain_of(wl, sl, wr, sr, base), wl >= wr, wl, wr));
        }
        let mut out: Option<(f64, bool, f64, f64)> = None;
        if wl + wm >= min_leaf && wr >= min_leaf {
            out = Some((gain_of(wl + wm, sl + sm, wr, sr, base), true, wl + wm, wr));
        }
        if wl >= min_leaf && wr + wm >= min_leaf {
            let g = gain_of(wl, sl, wr + wm, sr + sm, base);
            if out.is_none_or(|o| g > o.0) {
                out = Some((g, false, wl, wr + wm));
            }
        }
        out
    }

    fn scan_ordered(
        &self,
        a: usize,
        lo: usize,
        hi: usize,
        totals: &Totals,
        node_sum: f64,
        base: f64,
    ) -> Option<Candidate> {
        let order = self.sorted[a].as_ref().expect("ordered column has a sort order");
        let col = self.data.column(a);
        let seg = &order[lo..hi];
        let n_present = seg.iter().take_while(|&&r| !col[r as usize].is_nan()).count();
        if n_present < 2 {
            return None;
        }
        let mut wp = 0.0;
        let mut sp = 0.0;
        for &r in &seg[..n_present] {
            let w = f64::from(self.counts[r as usize]);
            wp += w;
            sp += w * (self.targets[r as usize] - totals.mean);
        }
        let (wm, sm) = (totals.weight - wp, node_sum - sp);
        let tol = GAIN_REL * totals.sse;

        let mut best: Option<(f64, f64, bool, f64, f64)> = None;
        let mut wl = 0.0;
        let mut sl = 0.0;
        for k in 0..n_present - 1 {
            let r = seg[k] as usize;
            let w = f64::from(self.counts[r]);
            wl += w;
            sl += w * (self.targets[r] - totals.mean);
            let (v, next) = (col[r], col[seg[k + 1] as usize]);
            if next <= v {
                continue;
            }
            if let Some((g, ml, lw, rw)) = self.evaluate(wl, sl, wp - wl, sp - sl, wm, sm, base) {
                if best.is_none_or(|b| g > b.0 + tol) {
                    let mut t = 0.5 * (v + next);
                    if t >= next {
                        t = v;
                    }
                    best = Some((g, t, ml, lw, rw));
                }
            }
        }
        best.map(|(gain, threshold, missing_left, weight_left, weight_right)| Candidate {
            attribute: a,
            gain,
            rule: SplitRule::Continuous { threshold },
            missing_left,
            weight_left,
            weight_right,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_categorical(
        &self,
        a: usize,
        min_level: i64,
        max_level: i64,
        lo: usize,
        hi: usize,
        totals: &Totals,
        node_sum: f64,
        base: f64,
    ) -> Option<Candidate> {
        let col = self.data.column(a);
        let n_levels = (max_level - min_level + 1) as usize;
        let mut w_level = vec![0.0; n_levels];
        let mut s_level = vec![0.0; n_levels];
        let mut wm = 0.0;
        let mut sm = 0.0;
        for &r in &self.rows[lo..hi] {
            let r = r as usize;
            let w = f64::from(self.counts[r]);
            let yc = self.targets[r] - totals.mean;
            let v = col[r];
            if v.is_nan() {
                wm += w;
                sm += w * yc;
            } else {
                let l = (v as i64 - min_level) as usize;
                w_level[l] += w;
                s_level[l] += w * yc;
            }
        }
        let mut present: Vec<usize> = (0..n_levels).filter(|&l| w_level[l] > 0.0).collect();
        if present.len() < 2 {
            return None;
        }
        present.sort_by(|&x, &y| {
            let (mx, my) = (s_level[x] / w_level[x], s_level[y] / w_level[y]);
            mx.partial_cmp(&my).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y))
        });
        let wp: f64 = totals.weight - wm;
        let sp: f64 = node_sum - sm;
        let tol = GAIN_REL * totals.sse;

        let mut best: Option<(f64, Vec<bool>, bool, f64, f64)> = None;
        let mut wl = 0.0;
        let mut sl = 0.0;
        for k in 0..present.len() - 1 {
            wl += w_level[present[k]];
            sl += s_level[present[k]];
            if let Some((g, ml, lw, rw)) = self.evaluate(wl, sl, wp - wl, sp - sl, wm, sm, base) {
                if best.as_ref().is_none_or(|b| g > b.0 + tol) {
                    let in_left = (0..present.len()).map(|i| i <= k).collect();
                    best = Some((g, in_left, ml, lw, rw));
                }
            }
        }
        // Mean ordering is only guaranteed optimal without a leaf-size
        // bound; with one, small level sets are searched exhaustively.
        let n_present = present.len();
        if self.config.min_leaf > 1 && n_present <= MAX_EXHAUSTIVE_LEVELS {
            for mask in 1u32..(1 << (n_present - 1)) {
                let (mut wl, mut sl) = (0.0, 0.0);
                for (i, &l) in present.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        wl += w_level[l];
                        sl += s_level[l];
                    }
                }
                if let Some((g, ml, lw, rw)) = self.evaluate(wl, sl, wp - wl, sp - sl, wm, sm, base) {
                    if best.as_ref().is_none_or(|b| g > b.0 + tol) {
                        let in_left = (0..n_present).map(|i| mask >> i & 1 == 1).collect();
                        best = Some((g, in_left, ml, lw, rw));
                    }
                }
            }
        }
        best.map(|(gain, in_left, missing_left, weight_left, weight_right)| {
            let code = |l: usize| l as i64 + min_level;
            let mut left: Vec<i64> = present.iter().zip(&in_left).filter(|(_, &g)| g).map(|(&l, _)| code(l)).collect();
            let mut right: Vec<i64> = present.iter().zip(&in_left).filter(|(_, &g)| !g).map(|(&l, _)| code(l)).collect();
            left.sort_unstable();
            right.sort_unstable();
            Candidate {
                attribute: a,
                gain,
                rule: SplitRule::Categorical { left, right },
                missing_left,
                weight_left,
                weight_right,
            }
        })
    }

    /// Stable partition of every buffer segment; returns the split point.
    fn partition(&mut self, lo: usize, hi: usize, split: &Candidate) -> usize {
        let col = self.data.column(split.attribute);
        let mut n_left = 0;
        for &r in &self.rows[lo..hi] {
            let v = col[r as usize];
            let left = if v.is_nan() {
                split.missing_left
            } else {
                match &split.rule {
                    SplitRule::Continuous { threshold } => v <= *threshold,
                    SplitRule::Categorical { left, .. } => left.binary_search(&(v as i64)).is_ok(),
                }
            };
            self.goes_left[r as usize] = left;
            n_left += usize::from(left);
        }
        let goes_left = &self.goes_left;
        let scratch = &mut self.scratch;
        let mut stable = |buf: &mut [u32]| {
            scratch.clear();
            let mut w = 0;
            for i in 0..buf.len() {
                let r = buf[i];
                if goes_left[r as usize] {
                    buf[w] = r;
                    w += 1;
                } else {
                    scratch.push(r);
                }
            }
            buf[w..].copy_from_slice(scratch);
        };
        stable(&mut self.rows[lo..hi]);
        for s in self.sorted.iter_mut().flatten() {
            stable(&mut s[lo..hi]);
        }
        lo + n_left
    }
}
