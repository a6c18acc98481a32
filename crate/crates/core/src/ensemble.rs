//! Bootstrap-aggregated regression trees and random forests.
//!
//! Each member tree is trained on a with-replacement bootstrap of the
//! training rows. A random forest additionally samples a fresh subset of the
//! predictors at every node. Member seeds are derived from the master seed by
//! tree index, so trees can be trained in any order or in parallel.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{Presorted, RegressionTree, TreeConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// How many predictors a forest samples at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Subspace {
    /// `floor(n_p / 3)`.
    Third,
    /// `floor(percent / 100 * n_p)`, with `percent` in (0, 100].
    Percent { percent: f64 },
}

impl Subspace {
    pub fn size(&self, n_predictors: usize) -> Result<usize> {
        let raw = match *self {
            Subspace::Third => n_predictors / 3,
            Subspace::Percent { percent } => {
                if !(percent > 0.0 && percent <= 100.0) {
                    return Err(Error::Config(format!("subspace percent {percent} not in (0, 100]")));
                }
                (percent * n_predictors as f64 / 100.0 + 1e-9).floor() as usize
            }
        };
        Ok(raw.clamp(1, n_predictors))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// Sample n rows with replacement.
    Resample,
    /// Use every row exactly once (degenerate; for testing equivalences).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Only read by [`fit_random_forest`].
    pub subspace: Subspace,
    pub bootstrap: Bootstrap,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_trees: 100,
            tree: TreeConfig::default(),
            subspace: Subspace::Third,
            bootstrap: Bootstrap::Resample,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Bagged,
    RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub config: EnsembleConfig,
    /// Predictors considered at each node.
    pub subspace_size: usize,
    pub tree_seeds: Vec<u64>,
    #[serde(skip)]
    trees: Vec<RegressionTree>,
}

fn bootstrap_counts(n: usize, mode: Bootstrap, tree_seed: u64) -> Vec<u32> {
    match mode {
        Bootstrap::Identity => vec![1; n],
        Bootstrap::Resample => {
            let mut rng = seed::rng(tree_seed);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
            counts
        }
    }
}

fn fit(
    kind: EnsembleKind,
    train: &Dataset,
    targets: &[f64],
    config: &EnsembleConfig,
    subspace_size: usize,
) -> Result<TreeEnsemble> {
    if train.is_empty() {
        return Err(Error::Input("cannot fit an ensemble on an empty dataset".into()));
    }
    if targets.len() != train.n_rows() {
        return Err(Error::Input("targets not aligned with rows".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    let p = train.n_predictors();
    let tree_config = TreeConfig {
        subspace_size: (subspace_size < p).then_some(subspace_size),
        ..config.tree.clone()
    };
    tree_config.validate(p)?;
    let presorted = Presorted::new(train);
    let tree_seeds: Vec<u64> = (0..config.n_trees as u64)
        .map(|k| seed::derive_indexed(config.seed, k))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let counts = bootstrap_counts(train.n_rows(), config.bootstrap, s);
            let cfg = TreeConfig {
                seed: seed::derive(s, "subspace"),
                ..tree_config.clone()
            };
            RegressionTree::fit_weighted(train, &presorted, targets, &counts, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeEnsemble {
        kind,
        config: config.clone(),
        subspace_size,
        tree_seeds,
        trees,
    })
}

/// Bagged trees: every predictor is available at every split.
pub fn fit_bagged(train: &Dataset, targets: &[f64], config: &EnsembleConfig) -> Result<TreeEnsemble> {
    fit(EnsembleKind::Bagged, train, targets, config, train.n_predictors())
}

/// Random forest: bagging plus per-node predictor subsampling.
pub fn fit_random_forest(train: &Dataset, targets: &[f64], config: &EnsembleConfig) -> Result<TreeEnsemble> {
    let size = config.subspace.size(train.n_predictors())?;
    fit(EnsembleKind::RandomForest, train, targets, config, size)
}

const MANIFEST: &str = "manifest.json";
const ENSEMBLE_FORMAT: &str = "ridehail-tree-ensemble/1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    ensemble: TreeEnsemble,
    tree_files: Vec<String>,
}

impl TreeEnsemble {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Unweighted mean of the member predictions.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                data.row_into(i, buf);
                self.predict(buf)
            })
            .collect()
    }

    /// Out-of-bag predictions on the training set the ensemble was fitted
    /// on; `None` for rows that appear in every bootstrap.
    pub fn oob_predictions(&self, train: &Dataset) -> Vec<Option<f64>> {
        let n = train.n_rows();
        let mut sum = vec![0.0; n];
        let mut hits = vec![0u32; n];
        let mut buf = Vec::new();
        for (tree, &s) in self.trees.iter().zip(&self.tree_seeds) {
            let counts = bootstrap_counts(n, self.config.bootstrap, s);
            for i in (0..n).filter(|&i| counts[i] == 0) {
                train.row_into(i, &mut buf);
                sum[i] += tree.predict(&buf);
                hits[i] += 1;
            }
        }
        sum.iter()
            .zip(&hits)
            .map(|(&s, &h)| (h > 0).then(|| s / f64::from(h)))
            .collect()
    }

    /// Writes `manifest.json` and one JSON document per tree into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let tree_dir = dir.join("trees");
        fs::create_dir_all(&tree_dir).map_err(|e| Error::io(&tree_dir, e))?;
        let mut tree_files = Vec::with_capacity(self.trees.len());
        for (k, t) in self.trees.iter().enumerate() {
            let name = format!("trees/tree_{k:04}.json");
            let path = dir.join(&name);
            fs::write(&path, t.to_json()?).map_err(|e| Error::io(&path, e))?;
            tree_files.push(name);
        }
        let manifest = Manifest {
            format: ENSEMBLE_FORMAT.into(),
            ensemble: self.clone(),
            tree_files,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != ENSEMBLE_FORMAT {
            return Err(Error::Schema(format!("unsupported ensemble format `{}`", manifest.format)));
        }
        let mut ens = manifest.ensemble;
        ens.trees = manifest
            .tree_files
            .iter()
            .map(|f| {
                let p = dir.join(f);
                let s = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                RegressionTree::from_json(&s)
            })
            .collect::<Result<_>>()?;
        if ens.trees.len() != ens.tree_seeds.len() {
            return Err(Error::Schema("tree count does not match manifest".into()));
        }
        Ok(ens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;

    fn toy(n: usize) -> (Dataset, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i % 17) as f64, ((i * 7) % 5) as f64, (i % 3 + 1) as f64])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1] * r[1] + 3.0 * r[2]).collect();
        let kinds = [
            ColumnKind::Continuous,
            ColumnKind::Integer { min: 0, max: 4 },
            ColumnKind::Categorical { min: 1, max: 3 },
        ];
        (Dataset::from_rows(&kinds, &rows, y.clone()).unwrap(), y)
    }

    #[test]
    fn subspace_sizes() {
        assert_eq!(Subspace::Third.size(19).unwrap(), 6);
        assert_eq!(Subspace::Percent { percent: 50.0 }.size(19).unwrap(), 9);
        assert_eq!(Subspace::Percent { percent: 33.0 }.size(19).unwrap(), 6);
        assert_eq!(Subspace::Percent { percent: 99.0 }.size(19).unwrap(), 18);
        assert_eq!(Subspace::Percent { percent: 100.0 }.size(19).unwrap(), 19);
        assert_eq!(Subspace::Percent { percent: 1.0 }.size(19).unwrap(), 1);
        assert!(Subspace::Percent { percent: 0.0 }.size(19).is_err());
        assert!(Subspace::Percent { percent: 100.5 }.size(19).is_err());
    }

    #[test]
    fn two_tree_average() {
        let (d, y) = toy(60);
        let ens = fit_bagged(&d, &y, &EnsembleConfig { n_trees: 2, seed: 4, ..Default::default() }).unwrap();
        let row = d.row(5);
        let manual = (ens.trees()[0].predict(&row) + ens.trees()[1].predict(&row)) / 2.0;
        assert_eq!(ens.predict(&row), manual);
    }

    #[test]
    fn constant_targets() {
        let (d, _) = toy(50);
        let y = vec![7.25; 50];
        let ens = fit_random_forest(&d, &y, &EnsembleConfig { n_trees: 10, ..Default::default() }).unwrap();
        assert!(ens.predict_dataset(&d).iter().all(|&p| p == 7.25));
    }

    #[test]
    fn full_subspace_forest_matches_bagging() {
        let (d, y) = toy(120);
        let cfg = EnsembleConfig {
            n_trees: 8,
            subspace: Subspace::Percent { percent: 100.0 },
            seed: 99,
            ..Default::default()
        };
        let bag = fit_bagged(&d, &y, &cfg).unwrap();
        let rf = fit_random_forest(&d, &y, &cfg).unwrap();
        assert_eq!(bag.trees(), rf.trees());
        assert_eq!(bag.predict_dataset(&d), rf.predict_dataset(&d));
    }

    #[test]
    fn identity_bootstrap_single_tree_matches_plain_tree() {
        let (d, y) = toy(90);
        let cfg = EnsembleConfig {
            n_trees: 1,
            bootstrap: Bootstrap::Identity,
            ..Default::default()
        };
        let ens = fit_bagged(&d, &y, &cfg).unwrap();
        let tree = RegressionTree::fit(&d, &y, &cfg.tree).unwrap();
        assert_eq!(ens.predict_dataset(&d), tree.predict_dataset(&d));
    }

    #[test]
    fn oob_covers_most_rows() {
        let (d, y) = toy(100);
        let ens = fit_bagged(&d, &y, &EnsembleConfig { n_trees: 20, ..Default::default() }).unwrap();
        let oob = ens.oob_predictions(&d);
        assert!(oob.iter().filter(|p| p.is_some()).count() > 95);
    }

    #[test]
    fn save_and_load() {
        let (d, y) = toy(80);
        let ens = fit_random_forest(&d, &y, &EnsembleConfig { n_trees: 3, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ens.save(dir.path()).unwrap();
        let back = TreeEnsemble::load(dir.path()).unwrap();
        assert_eq!(back, ens);
        assert_eq!(back.predict_dataset(&d), ens.predict_dataset(&d));
    }

    #[test]
    fn zero_trees_rejected() {
        let (d, y) = toy(10);
        assert!(fit_bagged(&d, &y, &EnsembleConfig { n_trees: 0, ..Default::default() }).is_err());
    }
}
