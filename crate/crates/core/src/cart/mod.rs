//! CART regression trees.
//!
//! Splits maximize the reduction in weighted squared error. Ordered columns
//! (continuous and integer) split on midpoints between consecutive distinct
//! values; categorical columns split on a level subset found by ordering the
//! levels by their mean target and scanning prefix cuts, which is exact for
//! squared error. Rows missing the split attribute follow a per-node default
//! direction chosen at fit time.

mod builder;

use serde::{Deserialize, Serialize};

pub(crate) use builder::build;
pub use builder::Presorted;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Minimum (weighted) number of rows in a leaf.
    pub min_leaf: usize,
    /// Minimum (weighted) number of rows for a node to be split.
    pub min_branch: usize,
    /// `None` grows until no admissible split remains.
    pub max_depth: Option<usize>,
    /// Predictors sampled at every node; `None` uses all of them.
    pub subspace_size: Option<usize>,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf: 1,
            min_branch: 10,
            max_depth: None,
            subspace_size: None,
            seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self, n_predictors: usize) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        if self.min_branch < 2 || self.min_branch <= self.min_leaf {
            return Err(Error::Config(format!(
                "min_branch ({}) must be at least 2 and exceed min_leaf ({})",
                self.min_branch, self.min_leaf
            )));
        }
        if let Some(s) = self.subspace_size {
            if s == 0 || s > n_predictors {
                return Err(Error::Config(format!(
                    "subspace size {s} not in [1, {n_predictors}]"
                )));
            }
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `value <= threshold`.
    Continuous { threshold: f64 },
    /// Left iff the level is in `left`. Levels in neither list were not
    /// seen at this node during fitting.
    Categorical { left: Vec<i64>, right: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        weight: f64,
    },
    Split {
        attribute: usize,
        rule: SplitRule,
        missing_left: bool,
        unseen_left: bool,
        gain: f64,
        weight: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    format: String,
    n_features: usize,
    depth: usize,
    nodes: Vec<Node>,
}

const TREE_FORMAT: &str = "ridehail-regression-tree/1";

impl Default for RegressionTree {
    /// A single leaf predicting 0.
    fn default() -> Self {
        RegressionTree::from_nodes(0, vec![Node::Leaf { value: 0.0, weight: 0.0 }])
    }
}

impl RegressionTree {
    pub(crate) fn from_nodes(n_features: usize, nodes: Vec<Node>) -> Self {
        let mut depth = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            depth = depth.max(d);
            if let Node::Split { left, right, .. } = nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        RegressionTree {
            format: TREE_FORMAT.to_string(),
            n_features,
            depth,
            nodes,
        }
    }

    /// Fits a tree on every row of `train` with unit weights.
    pub fn fit(train: &Dataset, targets: &[f64], config: &TreeConfig) -> Result<Self> {
        check_targets(train, targets)?;
        config.validate(train.n_predictors())?;
        let presorted = Presorted::new(train);
        let counts = vec![1u32; train.n_rows()];
        Ok(build(train, &presorted, targets, &counts, config))
    }

    /// Fits with per-row integer multiplicities (bootstrap counts); rows with
    /// a zero count are ignored.
    pub fn fit_weighted(
        train: &Dataset,
        presorted: &Presorted,
        targets: &[f64],
        counts: &[u32],
        config: &TreeConfig,
    ) -> Result<Self> {
        check_targets(train, targets)?;
        config.validate(train.n_predictors())?;
        if counts.len() != train.n_rows() {
            return Err(Error::Input("row counts not aligned with rows".into()));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Input("no rows with positive weight".into()));
        }
        Ok(build(train, presorted, targets, counts, config))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.route(|a| row[a])
    }

    fn route(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    attribute,
                    rule,
                    missing_left,
                    unseen_left,
                    left,
                    right,
                    ..
                } => {
                    let v = value(*attribute);
                    let go_left = if v.is_nan() {
                        *missing_left
                    } else {
                        match rule {
                            SplitRule::Continuous { threshold } => v <= *threshold,
                            SplitRule::Categorical { left, right } => {
                                let code = v as i64;
                                if left.binary_search(&code).is_ok() {
                                    true
                                } else if right.binary_search(&code).is_ok() {
                                    false
                                } else {
                                    *unseen_left
                                }
                            }
                        }
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    fn leaf_value(&self, i: usize) -> f64 {
        match self.nodes[i] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    /// Prediction for row `i` of `data`, read in place.
    pub fn predict_at(&self, data: &Dataset, i: usize) -> f64 {
        self.leaf_value(self.route(|a| data.value(i, a)))
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.leaf_value(self.leaf_index(row))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|i| self.predict_at(data, i)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tree: RegressionTree = serde_json::from_str(s)?;
        if tree.format != TREE_FORMAT {
            return Err(Error::Schema(format!("unsupported tree format `{}`", tree.format)));
        }
        tree.check_structure()?;
        Ok(tree)
    }

    fn check_structure(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split { attribute, left, right, .. } = n {
                if *attribute >= self.n_features
                    || *left <= i
                    || *right <= i
                    || *left >= self.nodes.len()
                    || *right >= self.nodes.len()
                {
                    return Err(Error::Schema(format!("malformed split node {i}")));
                }
            }
        }
        Ok(())
    }
}

fn check_targets(train: &Dataset, targets: &[f64]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Input("cannot fit a tree on an empty dataset".into()));
    }
    if targets.len() != train.n_rows() {
        return Err(Error::Input(format!(
            "{} targets for {} rows",
            targets.len(),
            train.n_rows()
        )));
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::Input("targets must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
