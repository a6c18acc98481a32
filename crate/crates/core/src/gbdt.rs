//! Gradient-boosted regression trees with squared-error loss.
//!
//! `F_0` is the training mean. Each stage fits a depth-limited tree to the
//! residuals `y - F_{m-1}(x)` on a without-replacement subsample and adds
//! `shrinkage * step * h_m(x)`. For squared error with mean-valued leaves the
//! line-search step is exactly 1, so `step` is recorded but never searched.
//!
//! The subsample and tree seeds of stage `m` depend only on the master seed
//! and `m`, so [`continue_fit`] reproduces a longer fresh fit bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cart::{Presorted, RegressionTree, TreeConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub iterations: usize,
    /// Shrinkage (learning rate) in (0, 1].
    pub shrinkage: f64,
    /// Fraction of training rows drawn, without replacement, per stage.
    pub bag_fraction: f64,
    /// Maximum depth of each stage tree; 1 is a stump.
    pub interaction_depth: usize,
    /// Minimum number of rows in a terminal node.
    pub min_leaf_terminal: usize,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            iterations: 1000,
            shrinkage: 0.1,
            bag_fraction: 0.7,
            interaction_depth: 19,
            min_leaf_terminal: 10,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config(format!("shrinkage {} not in (0, 1]", self.shrinkage)));
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return Err(Error::Config(format!("bag fraction {} not in (0, 1]", self.bag_fraction)));
        }
        if self.interaction_depth == 0 {
            return Err(Error::Config("interaction depth must be at least 1".into()));
        }
        if self.min_leaf_terminal == 0 {
            return Err(Error::Config("min_leaf_terminal must be at least 1".into()));
        }
        Ok(())
    }

    fn tree_config(&self, stage: usize) -> TreeConfig {
        TreeConfig {
            min_leaf: self.min_leaf_terminal,
            min_branch: 2 * self.min_leaf_terminal,
            max_depth: Some(self.interaction_depth),
            subspace_size: None,
            seed: seed::derive_indexed(seed::derive(self.seed, "tree"), stage as u64),
        }
    }

    fn subsample(&self, n: usize, stage: usize) -> Vec<u32> {
        let k = ((self.bag_fraction * n as f64).ceil() as usize).clamp(1, n);
        if k == n {
            return vec![1; n];
        }
        let mut rng = seed::rng(seed::derive_indexed(seed::derive(self.seed, "bag"), stage as u64));
        let mut counts = vec![0u32; n];
        for i in index::sample(&mut rng, n, k) {
            counts[i] = 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(skip)]
    pub tree: RegressionTree,
    /// Line-search step; 1 for squared error.
    pub step: f64,
}

/// Losses after each stage (mean squared error over all rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub train_mse: f64,
    pub valid_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub initial: f64,
    pub config: GbdtConfig,
    pub features: Vec<String>,
    pub stages: Vec<Stage>,
    pub history: Vec<HistoryEntry>,
}

fn feature_names(data: &Dataset) -> Vec<String> {
    data.schema().predictors().iter().map(|c| c.name.clone()).collect()
}

fn mse(pred: &[f64], obs: &[f64]) -> f64 {
    pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum::<f64>() / obs.len() as f64
}

fn check_aligned(data: &Dataset, targets: &[f64], what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Input(format!("{what} set is empty")));
    }
    if data.n_rows() != targets.len() {
        return Err(Error::Input(format!("{what} targets not aligned with rows")));
    }
    Ok(())
}

/// Fits `config.iterations` boosting stages.
pub fn fit_gbdt(
    train: &Dataset,
    targets: &[f64],
    config: &GbdtConfig,
    validation: Option<(&Dataset, &[f64])>,
) -> Result<GbdtModel> {
    config.validate()?;
    check_aligned(train, targets, "training")?;
    let initial = targets.iter().sum::<f64>() / targets.len() as f64;
    let model = GbdtModel {
        initial,
        config: config.clone(),
        features: feature_names(train),
        stages: Vec::new(),
        history: Vec::new(),
    };
    continue_fit(model, train, targets, config.iterations, validation)
}

/// Appends `extra` stages, continuing the seed stream where the model ended.
pub fn continue_fit(
    mut model: GbdtModel,
    train: &Dataset,
    targets: &[f64],
    extra: usize,
    validation: Option<(&Dataset, &[f64])>,
) -> Result<GbdtModel> {
    check_aligned(train, targets, "training")?;
    if feature_names(train) != model.features {
        return Err(Error::Schema("training predictors differ from the model's".into()));
    }
    if let Some((v, vy)) = validation {
        check_aligned(v, vy, "validation")?;
        if feature_names(v) != model.features {
            return Err(Error::Schema("validation predictors differ from the model's".into()));
        }
    }
    if extra == 0 {
        return Ok(model);
    }
    let n = train.n_rows();
    let mut f_train: Vec<f64> = (0..n).map(|i| model.staged_at(train, i, model.stages.len())).collect();
    let mut f_valid: Option<Vec<f64>> =
        validation.map(|(v, _)| (0..v.n_rows()).map(|i| model.staged_at(v, i, model.stages.len())).collect());
    let presorted = Presorted::new(train);
    let mut residuals = vec![0.0; n];
    let start = model.stages.len();
    for m in start..start + extra {
        for ((r, y), f) in residuals.iter_mut().zip(targets).zip(&f_train) {
            *r = y - f;
        }
        let counts = model.config.subsample(n, m);
        let tree = RegressionTree::fit_weighted(train, &presorted, &residuals, &counts, &model.config.tree_config(m))?;
        let step = 1.0;
        let scale = model.config.shrinkage * step;
        for (i, f) in f_train.iter_mut().enumerate() {
            *f += scale * tree.predict_at(train, i);
        }
        let train_mse = mse(&f_train, targets);
        if !train_mse.is_finite() {
            return Err(Error::Diverged(format!("training loss is {train_mse} at stage {}", m + 1)));
        }
        let valid_mse = match (validation, f_valid.as_mut()) {
            (Some((v, vy)), Some(fv)) => {
                for (i, f) in fv.iter_mut().enumerate() {
                    *f += scale * tree.predict_at(v, i);
                }
                Some(mse(fv, vy))
            }
            _ => None,
        };
        model.stages.push(Stage { tree, step });
        model.history.push(HistoryEntry {
            iteration: m + 1,
            train_mse,
            valid_mse,
        });
    }
    Ok(model)
}

/// 1-based iteration with the lowest validation loss; ties go to the
/// earliest.
pub fn early_stop_select(valid_losses: &[f64]) -> Result<usize> {
    if valid_losses.is_empty() {
        return Err(Error::Input("no validation history to select from".into()));
    }
    let mut best = 0;
    for (i, &l) in valid_losses.iter().enumerate() {
        if l < valid_losses[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

const MANIFEST: &str = "manifest.json";
const GBDT_FORMAT: &str = "ridehail-gbdt/1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    model: GbdtModel,
    stage_files: Vec<String>,
}

impl GbdtModel {
    fn staged_at(&self, data: &Dataset, i: usize, at_stage: usize) -> f64 {
        let mut f = self.initial;
        for s in &self.stages[..at_stage] {
            f += self.config.shrinkage * s.step * s.tree.predict_at(data, i);
        }
        f
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.stages.iter().fold(self.initial, |f, s| {
            f + self.config.shrinkage * s.step * s.tree.predict(row)
        })
    }

    /// Prediction using only the first `at_stage` stages (0 gives `F_0`).
    pub fn predict_staged(&self, row: &[f64], at_stage: usize) -> Result<f64> {
        if at_stage > self.stages.len() {
            return Err(Error::Input(format!(
                "stage {at_stage} requested from a model with {} stages",
                self.stages.len()
            )));
        }
        Ok(self.stages[..at_stage].iter().fold(self.initial, |f, s| {
            f + self.config.shrinkage * s.step * s.tree.predict(row)
        }))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|i| self.staged_at(data, i, self.stages.len())).collect()
    }

    pub fn valid_losses(&self) -> Option<Vec<f64>> {
        self.history.iter().map(|h| h.valid_mse).collect()
    }

    pub fn best_iteration(&self) -> Result<usize> {
        let losses = self
            .valid_losses()
            .ok_or_else(|| Error::Input("model was fitted without validation data".into()))?;
        early_stop_select(&losses)
    }

    /// A copy keeping only the first `stages` stages.
    pub fn truncated(&self, stages: usize) -> GbdtModel {
        let k = stages.min(self.stages.len());
        GbdtModel {
            stages: self.stages[..k].to_vec(),
            history: self.history[..k].to_vec(),
            ..self.clone()
        }
    }

    /// `iteration,train_rmse,valid_rmse` with an empty last field when no
    /// validation set was used.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,train_rmse,valid_rmse\n");
        for h in &self.history {
            let valid = h.valid_mse.map(|v| v.sqrt().to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", h.iteration, h.train_mse.sqrt(), valid);
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let stage_dir = dir.join("stages");
        fs::create_dir_all(&stage_dir).map_err(|e| Error::io(&stage_dir, e))?;
        let mut stage_files = Vec::with_capacity(self.stages.len());
        for (k, s) in self.stages.iter().enumerate() {
            let name = format!("stages/stage_{k:05}.json");
            let path = dir.join(&name);
            fs::write(&path, s.tree.to_json()?).map_err(|e| Error::io(&path, e))?;
            stage_files.push(name);
        }
        let manifest = Manifest {
            format: GBDT_FORMAT.into(),
            model: self.clone(),
            stage_files,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != GBDT_FORMAT {
            return Err(Error::Schema(format!("unsupported boosting format `{}`", manifest.format)));
        }
        let mut model = manifest.model;
        if model.stages.len() != manifest.stage_files.len() {
            return Err(Error::Schema("stage count does not match manifest".into()));
        }
        for (s, f) in model.stages.iter_mut().zip(&manifest.stage_files) {
            let p = dir.join(f);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            s.tree = RegressionTree::from_json(&text)?;
        }
        Ok(model)
    }
}
