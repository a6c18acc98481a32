//! End-to-end driver: synthesis, aggregation, attribute selection,
//! training, evaluation and model comparison.
//!
//! Every stage reads plain `key = value` settings, rejects keys it does not
//! know, derives all randomness from one master seed and writes a
//! `run_manifest.json` echoing the resolved configuration next to its
//! artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ann::{fit_mlp, MlpConfig, MlpModel};
use crate::cart::{RegressionTree, TreeConfig};
use crate::data::csvio::{load_covariates, load_requests, write_covariates, write_requests};
use crate::data::{aggregate_to_slots, load_slot_table, split_indices, write_slot_table, Dataset, Schema, SlotGrid, SlotKey};
use crate::ensemble::{fit_bagged, fit_random_forest, EnsembleConfig, Subspace, TreeEnsemble};
use crate::error::{Error, Result};
use crate::eval::{comparison_table, evaluate, EvalReport};
use crate::gbdt::{fit_gbdt, GbdtConfig, GbdtModel};
use crate::kv::KeyValues;
use crate::relieff::{rank_features, rrelieff_weights, select_features, RReliefFConfig};
use crate::seed;
use crate::synth::{generate_requests, CityProfile};

pub const MANIFEST: &str = "run_manifest.json";
pub const SLOT_TABLE: &str = "slot_table.csv";
pub const SCHEMA: &str = "schema.json";
const CITY: &str = "city.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// File names of the inputs read.
    pub inputs: Vec<String>,
    pub config: Value,
    pub details: BTreeMap<String, Value>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, inputs: &[&Path], config: &impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs: inputs
                .iter()
                .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned()))
                .collect(),
            config: serde_json::to_value(config)?,
            details: BTreeMap::new(),
        })
    }

    fn detail(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.details.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST), &serde_json::to_string_pretty(self)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Bdt,
    Rf,
    Gbdt,
    Ann,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Dt, ModelKind::Bdt, ModelKind::Rf, ModelKind::Gbdt, ModelKind::Ann];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Bdt => "bdt",
            ModelKind::Rf => "rf",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Ann => "ann",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Dt => TREE_KEYS,
            ModelKind::Bdt => BDT_KEYS,
            ModelKind::Rf => RF_KEYS,
            ModelKind::Gbdt => GBDT_KEYS,
            ModelKind::Ann => ANN_KEYS,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}' (expected dt, bdt, rf, gbdt or ann)")))
    }
}

const TREE_KEYS: &[&str] = &["min_leaf", "min_branch", "max_depth"];
const BDT_KEYS: &[&str] = &["min_leaf", "min_branch", "max_depth", "n_trees"];
const RF_KEYS: &[&str] = &["min_leaf", "min_branch", "max_depth", "n_trees", "delta"];
const GBDT_KEYS: &[&str] = &[
    "iterations",
    "shrinkage",
    "bag_fraction",
    "depth",
    "min_leaf_terminal",
    "early_stopping",
];
const ANN_KEYS: &[&str] = &[
    "network",
    "hidden",
    "dropout",
    "learning_rate",
    "decay",
    "momentum",
    "batch_size",
    "epochs",
];
const SPLIT_KEYS: &[&str] = &["train_fraction", "features"];

/// A model kind with its fully resolved hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelSpec {
    Dt { tree: TreeConfig },
    Bdt { ensemble: EnsembleConfig },
    Rf { ensemble: EnsembleConfig },
    Gbdt { gbdt: GbdtConfig, early_stopping: bool },
    Ann { mlp: MlpConfig },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Dt { .. } => ModelKind::Dt,
            ModelSpec::Bdt { .. } => ModelKind::Bdt,
            ModelSpec::Rf { .. } => ModelKind::Rf,
            ModelSpec::Gbdt { .. } => ModelKind::Gbdt,
            ModelSpec::Ann { .. } => ModelKind::Ann,
        }
    }

    /// Reads the keys relevant to `kind`; others are ignored. The model seed
    /// is derived from `master` and the model name.
    pub fn resolve(kind: ModelKind, kv: &KeyValues, master: u64) -> Result<Self> {
        let model_seed = seed::derive(master, &format!("model:{}", kind.name()));
        let tree = || -> Result<TreeConfig> {
            let d = TreeConfig::default();
            Ok(TreeConfig {
                min_leaf: kv.get("min_leaf")?.unwrap_or(d.min_leaf),
                min_branch: kv.get("min_branch")?.unwrap_or(d.min_branch),
                max_depth: kv.get("max_depth")?.or(d.max_depth),
                subspace_size: None,
                seed: model_seed,
            })
        };
        let ensemble = |subspace: Subspace| -> Result<EnsembleConfig> {
            Ok(EnsembleConfig {
                n_trees: kv.get("n_trees")?.unwrap_or(100),
                tree: tree()?,
                subspace,
                seed: model_seed,
                ..EnsembleConfig::default()
            })
        };
        Ok(match kind {
            ModelKind::Dt => ModelSpec::Dt { tree: tree()? },
            ModelKind::Bdt => ModelSpec::Bdt {
                ensemble: ensemble(Subspace::Percent { percent: 100.0 })?,
            },
            ModelKind::Rf => {
                let subspace = match kv.get::<f64>("delta")? {
                    Some(percent) => Subspace::Percent { percent },
                    None => Subspace::Third,
                };
                ModelSpec::Rf {
                    ensemble: ensemble(subspace)?,
                }
            }
            ModelKind::Gbdt => {
                let d = GbdtConfig::default();
                let gbdt = GbdtConfig {
                    iterations: kv.get("iterations")?.unwrap_or(d.iterations),
                    shrinkage: kv.get("shrinkage")?.unwrap_or(d.shrinkage),
                    bag_fraction: kv.get("bag_fraction")?.unwrap_or(d.bag_fraction),
                    interaction_depth: kv.get("depth")?.unwrap_or(d.interaction_depth),
                    min_leaf_terminal: kv.get("min_leaf_terminal")?.unwrap_or(d.min_leaf_terminal),
                    seed: model_seed,
                };
                gbdt.validate()?;
                ModelSpec::Gbdt {
                    gbdt,
                    early_stopping: kv.get("early_stopping")?.unwrap_or(true),
                }
            }
            ModelKind::Ann => {
                let mut mlp = match kv.get_str("network").unwrap_or("desk") {
                    "desk" => MlpConfig::default(),
                    "large" => MlpConfig::large(),
                    other => return Err(Error::Config(format!("unknown network size '{other}' (expected desk or large)"))),
                };
                if let Some(h) = kv.get_list::<usize>("hidden")? {
                    mlp.hidden = pair(&h, "hidden")?;
                }
                if let Some(p) = kv.get_list::<f64>("dropout")? {
                    mlp.dropout = pair(&p, "dropout")?;
                }
                mlp.learning_rate = kv.get("learning_rate")?.unwrap_or(mlp.learning_rate);
                mlp.decay = kv.get("decay")?.unwrap_or(mlp.decay);
                mlp.momentum = kv.get("momentum")?.unwrap_or(mlp.momentum);
                mlp.batch_size = kv.get("batch_size")?.unwrap_or(mlp.batch_size);
                mlp.epochs = kv.get("epochs")?.unwrap_or(mlp.epochs);
                mlp.seed = model_seed;
                mlp.validate()?;
                ModelSpec::Ann { mlp }
            }
        })
    }
}

fn pair<T: Copy>(v: &[T], key: &str) -> Result<[T; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Config(format!("'{key}' takes exactly two comma-separated values"))),
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Tree(RegressionTree),
    Ensemble(TreeEnsemble),
    Gbdt(GbdtModel),
    Ann(MlpModel),
}

impl TrainedModel {
    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        match self {
            TrainedModel::Tree(m) => m.predict_dataset(data),
            TrainedModel::Ensemble(m) => m.predict_dataset(data),
            TrainedModel::Gbdt(m) => m.predict_dataset(data),
            TrainedModel::Ann(m) => m.predict_dataset(data),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        match self {
            TrainedModel::Tree(m) => write_file(&dir.join("tree.json"), &m.to_json()?),
            TrainedModel::Ensemble(m) => m.save(dir),
            TrainedModel::Gbdt(m) => m.save(dir),
            TrainedModel::Ann(m) => m.save(dir),
        }
    }

    pub fn load(kind: ModelKind, dir: &Path) -> Result<Self> {
        Ok(match kind {
            ModelKind::Dt => {
                let path = dir.join("tree.json");
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                TrainedModel::Tree(RegressionTree::from_json(&text)?)
            }
            ModelKind::Bdt | ModelKind::Rf => TrainedModel::Ensemble(TreeEnsemble::load(dir)?),
            ModelKind::Gbdt => TrainedModel::Gbdt(GbdtModel::load(dir)?),
            ModelKind::Ann => TrainedModel::Ann(MlpModel::load(dir)?),
        })
    }
}

/// A model together with its training history and notable facts.
pub struct Fitted {
    pub model: TrainedModel,
    pub history_csv: Option<String>,
    pub details: BTreeMap<String, Value>,
}

/// Fits `spec` on `train`; the validation set drives GBDT early stopping
/// and the network's best-epoch selection.
pub fn fit_model(spec: &ModelSpec, train: &Dataset, valid: &Dataset) -> Result<Fitted> {
    let mut details = BTreeMap::new();
    let mut history_csv = None;
    let model = match spec {
        ModelSpec::Dt { tree } => {
            let t = RegressionTree::fit(train, train.target(), tree)?;
            details.insert("nodes".into(), json!(t.nodes().len()));
            details.insert("depth".into(), json!(t.depth()));
            TrainedModel::Tree(t)
        }
        ModelSpec::Bdt { ensemble } | ModelSpec::Rf { ensemble } => {
            let e = if spec.kind() == ModelKind::Bdt {
                fit_bagged(train, train.target(), ensemble)?
            } else {
                fit_random_forest(train, train.target(), ensemble)?
            };
            details.insert("subspace_size".into(), json!(e.subspace_size));
            TrainedModel::Ensemble(e)
        }
        ModelSpec::Gbdt { gbdt, early_stopping } => {
            let g = fit_gbdt(train, train.target(), gbdt, Some((valid, valid.target())))?;
            history_csv = Some(g.history_csv());
            let best = g.best_iteration()?;
            details.insert("best_iteration".into(), json!(best));
            if *early_stopping {
                TrainedModel::Gbdt(g.truncated(best))
            } else {
                TrainedModel::Gbdt(g)
            }
        }
        ModelSpec::Ann { mlp } => {
            let m = fit_mlp(train, train.target(), mlp, Some((valid, valid.target())))?;
            history_csv = Some(m.history_csv());
            details.insert("best_epoch".into(), json!(m.best_epoch));
            details.insert("input_width".into(), json!(m.encoder.width()));
            TrainedModel::Ann(m)
        }
    };
    Ok(Fitted {
        model,
        history_csv,
        details,
    })
}

/// Loads a slot table together with the `schema.json` written beside it.
pub fn load_table(path: &Path) -> Result<Dataset> {
    let schema_path = path.with_file_name(SCHEMA);
    let text = fs::read_to_string(&schema_path).map_err(|e| Error::io(&schema_path, e))?;
    let schema: Schema = serde_json::from_str(&text)?;
    load_slot_table(path, &schema)
}

/// Writes `slot_table.csv` and `schema.json` into `dir`.
pub fn write_table(dir: &Path, data: &Dataset) -> Result<()> {
    create_dir(dir)?;
    write_slot_table(&dir.join(SLOT_TABLE), data)?;
    write_file(&dir.join(SCHEMA), &serde_json::to_string_pretty(data.schema())?)
}

/// Train/validation partition of a slot table.
pub struct Split {
    pub train: Dataset,
    pub valid: Dataset,
    pub valid_keys: Vec<SlotKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSettings {
    pub train_fraction: f64,
    /// Predictors used for training; empty means all.
    pub features: Vec<String>,
}

impl SplitSettings {
    fn resolve(kv: &KeyValues) -> Result<Self> {
        Ok(SplitSettings {
            train_fraction: kv.get("train_fraction")?.unwrap_or(0.7),
            features: kv.get_list("features")?.unwrap_or_default(),
        })
    }

    pub fn apply(&self, data: &Dataset, master: u64) -> Result<Split> {
        let (tr, va) = split_indices(data.n_rows(), self.train_fraction, seed::derive(master, "split"))?;
        let valid_full = data.subset(&va);
        let valid_keys = valid_full.slot_keys()?;
        let (train, valid) = if self.features.is_empty() {
            (data.subset(&tr), valid_full)
        } else {
            let names: Vec<&str> = self.features.iter().map(String::as_str).collect();
            let selected = data.select_predictors(&names)?;
            (selected.subset(&tr), selected.subset(&va))
        };
        Ok(Split {
            train,
            valid,
            valid_keys,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SynthSettings {
    n_days: u32,
    profile: CityProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CityShape {
    n_districts: u32,
    n_days: u32,
    start_dow: u32,
}

/// `synth`: raw requests (`requests.csv`), covariates (`traffic.csv`,
/// `weather.csv`) and the grid shape (`city.json`).
pub fn run_synth(out: &Path, kv: &KeyValues, master: u64) -> Result<RunManifest> {
    let mut allowed = CityProfile::KEYS.to_vec();
    allowed.push("n_days");
    kv.reject_unknown(&allowed)?;
    let mut profile_kv = kv.clone();
    let n_days = profile_kv.remove("n_days").map_or(Ok(21), |v| {
        v.parse::<u32>()
            .map_err(|_| Error::Config(format!("cannot parse value '{v}' for key 'n_days'")))
    })?;
    if n_days == 0 {
        return Err(Error::Config("n_days must be at least 1".into()));
    }
    let profile = CityProfile::from_key_values(&profile_kv)?;
    let city = generate_requests(&profile, n_days, seed::derive(master, "synth"))?;
    create_dir(out)?;
    write_requests(&out.join("requests.csv"), &city.requests)?;
    write_covariates(out, &city.covariates)?;
    let shape = CityShape {
        n_districts: city.grid.n_districts,
        n_days: city.grid.n_days,
        start_dow: city.grid.start_dow,
    };
    write_file(&out.join(CITY), &serde_json::to_string_pretty(&shape)?)?;
    let mut m = RunManifest::new("synth", master, &[], &SynthSettings { n_days, profile })?;
    m.detail("requests", city.requests.len())?;
    m.detail("slots", city.grid.n_slots())?;
    m.write(out)?;
    Ok(m)
}

/// `aggregate`: reads a `synth` directory (or any directory with the same
/// files) and writes the slot table.
pub fn run_aggregate(input: &Path, out: &Path, kv: &KeyValues, master: u64) -> Result<RunManifest> {
    kv.reject_unknown(&["n_districts", "n_days", "start_dow"])?;
    let city_path = input.join(CITY);
    let saved: Option<CityShape> = match fs::read_to_string(&city_path) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => None,
    };
    let get = |key: &str, from_city: Option<u32>| -> Result<u32> {
        kv.get(key)?
            .or(from_city)
            .ok_or_else(|| Error::Config(format!("'{key}' is required when {CITY} is absent")))
    };
    let grid = SlotGrid {
        n_districts: get("n_districts", saved.map(|s| s.n_districts))?,
        n_days: get("n_days", saved.map(|s| s.n_days))?,
        start_dow: get("start_dow", saved.map(|s| s.start_dow))?,
    };
    let requests_path = input.join("requests.csv");
    let requests = load_requests(&requests_path)?;
    let covariates = load_covariates(input)?;
    let data = aggregate_to_slots(requests.iter().copied(), grid, &covariates)?;
    write_table(out, &data)?;
    let shape = CityShape {
        n_districts: grid.n_districts,
        n_days: grid.n_days,
        start_dow: grid.start_dow,
    };
    let mut m = RunManifest::new("aggregate", master, &[&requests_path], &shape)?;
    m.detail("requests", requests.len())?;
    m.detail("rows", data.n_rows())?;
    m.detail("total_demand", data.target().iter().sum::<f64>())?;
    m.write(out)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SelectSettings {
    relieff: RReliefFConfig,
    threshold: f64,
}

/// `select`: RReliefF weights (`weights.json`), the ranking
/// (`ranking.csv`) and a config fragment listing the attributes above the
/// threshold (`selected.cfg`).
pub fn run_select(table: &Path, out: &Path, kv: &KeyValues, master: u64) -> Result<RunManifest> {
    kv.reject_unknown(&["m", "k", "sigma", "threshold"])?;
    let data = load_table(table)?;
    let d = RReliefFConfig::default();
    let settings = SelectSettings {
        relieff: RReliefFConfig {
            m: kv.get("m")?.unwrap_or(d.m.min(data.n_rows())),
            k: kv.get("k")?.unwrap_or(d.k),
            sigma: kv.get("sigma")?.unwrap_or(d.sigma),
            seed: seed::derive(master, "relieff"),
        },
        threshold: kv.get("threshold")?.unwrap_or(0.0),
    };
    let weights = rrelieff_weights(&data, &settings.relieff)?;
    let ranking = rank_features(&weights);
    let selected = select_features(&ranking, settings.threshold)?;
    create_dir(out)?;
    write_file(&out.join("weights.json"), &serde_json::to_string_pretty(&weights)?)?;
    let mut csv = String::from("rank,attribute,weight\n");
    for (r, a) in ranking.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", r + 1, a.name, a.weight);
    }
    write_file(&out.join("ranking.csv"), &csv)?;
    let names: Vec<&str> = selected.iter().map(|a| a.name.as_str()).collect();
    write_file(&out.join("selected.cfg"), &format!("features = {}\n", names.join(",")))?;
    let mut m = RunManifest::new("select", master, &[table], &settings)?;
    m.detail("selected", &names)?;
    m.detail("degenerate_target", weights.degenerate_target)?;
    m.write(out)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(flatten)]
    pub split: SplitSettings,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

impl TrainSettings {
    pub fn resolve(kv: &KeyValues, master: u64) -> Result<Self> {
        let kind: ModelKind = kv
            .get_str("model")
            .ok_or_else(|| Error::Config("'model' is required".into()))?
            .parse()?;
        let mut allowed = vec!["model"];
        allowed.extend_from_slice(SPLIT_KEYS);
        allowed.extend_from_slice(kind.keys());
        kv.reject_unknown(&allowed)?;
        Ok(TrainSettings {
            split: SplitSettings::resolve(kv)?,
            spec: ModelSpec::resolve(kind, kv, master)?,
        })
    }
}

fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    crate::eval::rmse(pred, obs)
}

/// `train`: the fitted model under `model/`, `history.csv` for boosting and
/// the network, and train/validation RMSE in the manifest.
pub fn run_train(table: &Path, out: &Path, kv: &KeyValues, master: u64) -> Result<RunManifest> {
    let settings = TrainSettings::resolve(kv, master)?;
    let data = load_table(table)?;
    let split = settings.split.apply(&data, master)?;
    let fitted = fit_model(&settings.spec, &split.train, &split.valid)?;
    create_dir(out)?;
    fitted.model.save(&out.join("model"))?;
    if let Some(h) = &fitted.history_csv {
        write_file(&out.join("history.csv"), h)?;
    }
    let mut m = RunManifest::new("train", master, &[table], &settings)?;
    m.details = fitted.details;
    m.detail("train_rows", split.train.n_rows())?;
    m.detail("valid_rows", split.valid.n_rows())?;
    m.detail("train_rmse", rmse(&fitted.model.predict_dataset(&split.train), split.train.target())?)?;
    m.detail("valid_rmse", rmse(&fitted.model.predict_dataset(&split.valid), split.valid.target())?)?;
    m.write(out)?;
    Ok(m)
}

/// `evaluate`: scores a `train` output directory on the validation rows of
/// the same split it was trained with.
pub fn run_evaluate(table: &Path, model_dir: &Path, out: &Path, kv: &KeyValues) -> Result<RunManifest> {
    kv.reject_unknown(&[])?;
    let trained = RunManifest::read(model_dir)?;
    if trained.command != "train" {
        return Err(Error::Input(format!("{} was not written by `train`", model_dir.display())));
    }
    let settings: TrainSettings = serde_json::from_value(trained.config.clone())?;
    let data = load_table(table)?;
    let split = settings.split.apply(&data, trained.seed)?;
    let model = TrainedModel::load(settings.spec.kind(), &model_dir.join("model"))?;
    let pred = model.predict_dataset(&split.valid);
    let report = evaluate(settings.spec.kind().name(), &pred, split.valid.target(), &split.valid_keys)?;
    report.write(out)?;
    write_predictions(&out.join("predictions.csv"), &split.valid_keys, &pred, split.valid.target())?;
    let mut m = RunManifest::new("evaluate", trained.seed, &[table, model_dir], &settings)?;
    m.detail("rmse", report.rmse)?;
    m.detail("pooling_residual", report.pooling_residual)?;
    m.write(out)?;
    Ok(m)
}

fn write_predictions(path: &Path, keys: &[SlotKey], pred: &[f64], obs: &[f64]) -> Result<()> {
    let mut s = String::from("district_id,day_index,slot_of_day,dow,observed,predicted\n");
    for ((k, p), o) in keys.iter().zip(pred).zip(obs) {
        let _ = writeln!(s, "{},{},{},{},{o},{p}", k.district_id, k.day_index, k.slot_of_day, k.dow);
    }
    write_file(path, &s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CompareSettings {
    #[serde(flatten)]
    split: SplitSettings,
    models: Vec<ModelSpec>,
}

/// `compare`: trains every listed model on one split and writes the
/// comparison table (`comparison.csv`) plus one report directory per model.
pub fn run_compare(table: &Path, out: &Path, kv: &KeyValues, master: u64) -> Result<(RunManifest, Vec<EvalReport>)> {
    let mut allowed = vec!["models"];
    allowed.extend_from_slice(SPLIT_KEYS);
    for k in ModelKind::ALL {
        allowed.extend_from_slice(k.keys());
    }
    kv.reject_unknown(&allowed)?;
    let kinds: Vec<ModelKind> = match kv.get_list::<String>("models")? {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_>>()?,
        None => ModelKind::ALL.to_vec(),
    };
    if kinds.is_empty() {
        return Err(Error::Config("'models' lists no model".into()));
    }
    let settings = CompareSettings {
        split: SplitSettings::resolve(kv)?,
        models: kinds
            .iter()
            .map(|&k| ModelSpec::resolve(k, kv, master))
            .collect::<Result<_>>()?,
    };
    let data = load_table(table)?;
    let split = settings.split.apply(&data, master)?;
    create_dir(out)?;
    let mut m = RunManifest::new("compare", master, &[table], &settings)?;
    let mut reports = Vec::new();
    for spec in &settings.models {
        let name = spec.kind().name();
        let fitted = fit_model(spec, &split.train, &split.valid)?;
        let pred = fitted.model.predict_dataset(&split.valid);
        let report = evaluate(name, &pred, split.valid.target(), &split.valid_keys)?;
        let dir = out.join(name);
        report.write(&dir)?;
        if let Some(h) = &fitted.history_csv {
            write_file(&dir.join("history.csv"), h)?;
        }
        let mut d = fitted.details;
        d.insert(
            "train_rmse".into(),
            json!(rmse(&fitted.model.predict_dataset(&split.train), split.train.target())?),
        );
        d.insert("valid_rmse".into(), json!(report.rmse));
        m.detail(name, d)?;
        reports.push(report);
    }
    write_file(&out.join("comparison.csv"), &comparison_table(&reports))?;
    m.write(out)?;
    Ok((m, reports))
}
