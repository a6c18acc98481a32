//! Feedforward network regressor.
//!
//! Two sigmoid hidden layers feed a linear output clipped to `max(0, y)`.
//! Training minimises mean squared error by mini-batch SGD with momentum,
//! an exponentially decaying learning rate and inverted dropout on the
//! inputs of both hidden layers. With a validation set the parameters of
//! the epoch with the lowest validation RMSE are kept.
//!
//! Training runs on one thread, so a fixed seed gives identical weights.

pub mod encode;
pub mod network;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use encode::{bit_width, ColumnEncoding, InputEncoder};
pub use network::{sigmoid, Gradients, Layer, Network};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng as SeedRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: [usize; 2],
    /// Dropout probability on the inputs of the first and second hidden layer.
    pub dropout: [f64; 2],
    pub learning_rate: f64,
    /// Fractional learning-rate decay applied after every epoch.
    pub decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: [64, 32],
            dropout: [0.6, 0.05],
            learning_rate: 1e-4,
            decay: 0.01,
            momentum: 0.9,
            batch_size: 150,
            epochs: 200,
            seed: 0,
        }
    }
}

impl MlpConfig {
    /// The full-size network: 1024 and 512 hidden units, 1000 epochs.
    pub fn large() -> Self {
        MlpConfig {
            hidden: [1024, 512],
            epochs: 1000,
            ..MlpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers need at least one unit".into()));
        }
        if self.dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::Config(format!("dropout {:?} not in [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return Err(Error::Config(format!("decay {} not in [0, 1)", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} not in [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inverted-dropout mask: 0 with probability `p`, otherwise `1 / (1 - p)`.
pub fn dropout_mask(rng: &mut SeedRng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_rmse: f64,
    pub valid_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub features: Vec<String>,
    pub encoder: InputEncoder,
    pub network: Network,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial weights.
    pub best_epoch: usize,
}

const MLP_FORMAT: &str = "ridehail-mlp/1";
const MODEL_FILE: &str = "model.json";

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    #[serde(flatten)]
    model: MlpModel,
}

fn check_targets(data: &Dataset, targets: &[f64], what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Input(format!("{what} set is empty")));
    }
    if data.n_rows() != targets.len() {
        return Err(Error::Input(format!("{what} targets not aligned with rows")));
    }
    if let Some(t) = targets.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Input(format!("{what} target {t} is not a finite non-negative value")));
    }
    Ok(())
}

fn rmse_of(net: &Network, x: &[f64], y: &[f64]) -> f64 {
    let w = net.n_inputs();
    let sse: f64 = y
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let e = net.forward(&x[i * w..(i + 1) * w]) - t;
            e * e
        })
        .sum();
    (sse / y.len() as f64).sqrt()
}

fn diverged(epoch: usize, lr: f64) -> Error {
    Error::Diverged(format!(
        "non-finite loss in epoch {epoch} at learning rate {lr:e}; lower learning_rate or momentum"
    ))
}

/// Trains a network on `train`. Encoder bounds are fitted on `train` only.
pub fn fit_mlp(
    train: &Dataset,
    targets: &[f64],
    config: &MlpConfig,
    validation: Option<(&Dataset, &[f64])>,
) -> Result<MlpModel> {
    config.validate()?;
    check_targets(train, targets, "training")?;
    if let Some((v, vt)) = validation {
        check_targets(v, vt, "validation")?;
        if !v.same_schema(train) {
            return Err(Error::Input("validation schema differs from training schema".into()));
        }
    }
    let encoder = InputEncoder::fit(train)?;
    let width = encoder.width();
    let x = encoder.encode_dataset(train)?;
    let valid = match validation {
        Some((v, vt)) => Some((encoder.encode_dataset(v)?, vt)),
        None => None,
    };

    let mut init_rng = seed::rng(seed::derive(config.seed, "init"));
    let mut shuffle_rng = seed::rng(seed::derive(config.seed, "shuffle"));
    let mut drop_rng = seed::rng(seed::derive(config.seed, "dropout"));
    let sizes = [width, config.hidden[0], config.hidden[1], 1];
    let mut net = Network::init(&sizes, &mut init_rng);
    // Start the output unit at the mean demand so its ReLU is active.
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    net.layers.last_mut().unwrap().biases[0] = mean;
    let mut params = net.params();
    let mut velocity = vec![0.0; params.len()];
    let mut best = (f64::INFINITY, 0, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let use_dropout = config.dropout.iter().any(|&p| p > 0.0);

    for epoch in 1..=config.epochs {
        let lr = config.learning_rate * (1.0 - config.decay).powi(epoch as i32 - 1);
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let mut xb = Vec::with_capacity(batch.len() * width);
            let mut yb = Vec::with_capacity(batch.len());
            for &i in batch {
                xb.extend_from_slice(&x[i * width..(i + 1) * width]);
                yb.push(targets[i]);
            }
            let masks = use_dropout.then(|| {
                sizes[..3]
                    .iter()
                    .enumerate()
                    .map(|(k, &n)| {
                        let p = config.dropout.get(k).copied().unwrap_or(0.0);
                        if p > 0.0 {
                            dropout_mask(&mut drop_rng, batch.len() * n, p)
                        } else {
                            vec![1.0; batch.len() * n]
                        }
                    })
                    .collect::<Vec<_>>()
            });
            let (loss, grad) = net.loss_and_gradient(&xb, &yb, masks.as_deref());
            if !loss.is_finite() {
                return Err(diverged(epoch, lr));
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(grad.flat()) {
                *v = config.momentum * *v - lr * g;
                *p += *v;
            }
            net.set_params(&params);
        }
        let train_rmse = rmse_of(&net, &x, targets);
        if !train_rmse.is_finite() {
            return Err(diverged(epoch, lr));
        }
        let valid_rmse = valid.as_ref().map(|(vx, vy)| rmse_of(&net, vx, vy));
        let score = valid_rmse.unwrap_or(train_rmse);
        if valid.is_none() || score < best.0 {
            best = (score, epoch, params.clone());
        }
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_rmse,
            valid_rmse,
        });
    }
    net.set_params(&best.2);
    Ok(MlpModel {
        config: config.clone(),
        features: train.schema().predictors().iter().map(|c| c.name.clone()).collect(),
        encoder,
        network: net,
        history,
        best_epoch: best.1,
    })
}

impl MlpModel {
    /// Deterministic forward pass without dropout; never negative.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.network.forward(&self.encoder.encode(row))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        let mut row = Vec::new();
        let mut enc = vec![0.0; self.encoder.width()];
        (0..data.n_rows())
            .map(|i| {
                data.row_into(i, &mut row);
                self.encoder.encode_row(&row, &mut enc);
                self.network.forward(&enc)
            })
            .collect()
    }

    /// `epoch,learning_rate,train_rmse,valid_rmse`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,learning_rate,train_rmse,valid_rmse\n");
        for h in &self.history {
            let valid = h.valid_rmse.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", h.epoch, h.learning_rate, h.train_rmse, valid);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Document {
            format: MLP_FORMAT.into(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != MLP_FORMAT {
            return Err(Error::Schema(format!("unsupported network format `{}`", doc.format)));
        }
        let m = doc.model;
        if m.network.layers.is_empty() || m.network.n_inputs() != m.encoder.width() {
            return Err(Error::Schema("network input width does not match its encoder".into()));
        }
        if m.network.layers.windows(2).any(|w| w[0].n_out != w[1].n_in) || m.network.layers.last().unwrap().n_out != 1 {
            return Err(Error::Schema("network layer shapes do not chain".into()));
        }
        Ok(m)
    }

    /// Writes `model.json` and `history.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MODEL_FILE);
        fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("history.csv");
        fs::write(&path, self.history_csv()).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;

    fn toy(n: usize, s: u64) -> (Dataset, Vec<f64>) {
        let mut rng = seed::rng(s);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(0.0..1.0), f64::from(rng.gen_range(0..4u8))])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + r[1]).collect();
        let kinds = [ColumnKind::Continuous, ColumnKind::Categorical { min: 0, max: 3 }];
        (Dataset::from_rows(&kinds, &rows, y.clone()).unwrap(), y)
    }

    #[test]
    fn zero_epochs_keep_initial_weights() {
        let (d, y) = toy(20, 1);
        let cfg = MlpConfig {
            hidden: [3, 2],
            epochs: 0,
            seed: 9,
            ..MlpConfig::default()
        };
        let m = fit_mlp(&d, &y, &cfg, None).unwrap();
        let mut rng = seed::rng(seed::derive(9, "init"));
        let mut expected = Network::init(&[3, 3, 2, 1], &mut rng);
        expected.layers[2].biases[0] = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(m.network, expected);
        assert_eq!(m.best_epoch, 0);
        assert!(m.history.is_empty());
    }

    #[test]
    fn two_point_problem_converges() {
        let kinds = [ColumnKind::Continuous];
        let d = Dataset::from_rows(&kinds, &[vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let cfg = MlpConfig {
            hidden: [1, 1],
            dropout: [0.0, 0.0],
            learning_rate: 0.5,
            decay: 0.0,
            batch_size: 2,
            epochs: 5000,
            ..MlpConfig::default()
        };
        let m = fit_mlp(&d, &[0.0, 1.0], &cfg, None).unwrap();
        let mse = m.history.last().unwrap().train_rmse.powi(2);
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn learns_toy_function_and_round_trips() {
        let (d, y) = toy(300, 2);
        let (v, vy) = toy(100, 3);
        let cfg = MlpConfig {
            hidden: [16, 8],
            dropout: [0.0, 0.0],
            learning_rate: 0.01,
            batch_size: 20,
            epochs: 150,
            ..MlpConfig::default()
        };
        let m = fit_mlp(&d, &y, &cfg, Some((&v, &vy))).unwrap();
        let best = m.history[m.best_epoch - 1].valid_rmse.unwrap();
        assert!(m.history.iter().all(|h| h.valid_rmse.unwrap() >= best));
        assert!(best < 0.5, "valid rmse {best}");
        let pred = m.predict_dataset(&v);
        assert!(pred.iter().all(|p| *p >= 0.0));
        let again = MlpModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(again.predict_dataset(&v), pred);
        assert_eq!(fit_mlp(&d, &y, &cfg, Some((&v, &vy))).unwrap(), m);
    }

    #[test]
    fn divergence_is_reported() {
        let (d, y) = toy(50, 4);
        let y: Vec<f64> = y.iter().map(|t| t * 1e200).collect();
        let cfg = MlpConfig {
            hidden: [4, 4],
            learning_rate: 0.5,
            epochs: 5,
            ..MlpConfig::default()
        };
        let err = fit_mlp(&d, &y, &cfg, None).unwrap_err();
        assert_eq!(err.category(), "diverged");
    }

    #[test]
    fn negative_targets_rejected() {
        let (d, mut y) = toy(10, 5);
        y[3] = -1.0;
        assert_eq!(fit_mlp(&d, &y, &MlpConfig::default(), None).unwrap_err().category(), "input");
    }

    #[test]
    fn dropout_preserves_expected_preactivation() {
        let mut rng = seed::rng(21);
        let w: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let exact: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        for p in [0.6, 0.05] {
            let trials = 100_000;
            let mut total = 0.0;
            for _ in 0..trials {
                let m = dropout_mask(&mut rng, 8, p);
                total += w.iter().zip(&x).zip(&m).map(|((a, b), k)| a * b * k).sum::<f64>();
            }
            let mc = total / trials as f64;
            assert!(((mc - exact) / exact).abs() < 0.01, "p={p}: {mc} vs {exact}");
        }
    }
}
