//! Dense feedforward network: sigmoid hidden layers and a linear output
//! clipped at zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::Rng as SeedRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LayerDoc", try_from = "LayerDoc")]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Serialized form: one weight row per output unit.
#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl From<Layer> for LayerDoc {
    fn from(l: Layer) -> Self {
        LayerDoc {
            weights: l.weights.chunks(l.n_in.max(1)).map(<[f64]>::to_vec).collect(),
            biases: l.biases,
        }
    }
}

impl TryFrom<LayerDoc> for Layer {
    type Error = String;

    fn try_from(d: LayerDoc) -> Result<Self, String> {
        let n_out = d.biases.len();
        let n_in = d.weights.first().map_or(0, Vec::len);
        if n_out == 0 || n_in == 0 || d.weights.len() != n_out || d.weights.iter().any(|r| r.len() != n_in) {
            return Err("layer weight matrix is ragged or empty".into());
        }
        Ok(Layer {
            n_in,
            n_out,
            weights: d.weights.concat(),
            biases: d.biases,
        })
    }
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    /// Uniform on `[-1/sqrt(n_in), 1/sqrt(n_in)]` for weights and biases.
    pub fn uniform(n_in: usize, n_out: usize, rng: &mut SeedRng) -> Self {
        let a = 1.0 / (n_in as f64).sqrt();
        let mut l = Layer::zeros(n_in, n_out);
        for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
            *w = rng.gen_range(-a..=a);
        }
        l
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.n_in).zip(&self.biases)) {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Gradients with the same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        Network { layers: self.layers.clone() }.params()
    }
}

impl Network {
    /// `sizes` lists the input width, the hidden widths and finally 1.
    pub fn init(sizes: &[usize], rng: &mut SeedRng) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least one layer");
        Network {
            layers: sizes.windows(2).map(|w| Layer::uniform(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Network {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut pos = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[pos..pos + nw]);
            pos += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[pos..pos + nb]);
            pos += nb;
        }
    }

    /// Output pre-activation (before clipping).
    pub fn pre_output(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; l.n_out];
            l.affine(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            cur = next;
        }
        cur[0]
    }

    /// Inference: no dropout, output clipped to `max(0, y)`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.pre_output(x).max(0.0)
    }

    /// Mean squared error over a row-major batch and its gradient.
    ///
    /// `masks[k]`, when present, multiplies the input of layer `k`
    /// elementwise (already scaled for inverted dropout); one mask vector
    /// of length `batch * n_in` per layer.
    pub fn loss_and_gradient(&self, x: &[f64], y: &[f64], masks: Option<&[Vec<f64>]>) -> (f64, Gradients) {
        let n_in = self.n_inputs();
        let b = y.len();
        assert_eq!(x.len(), b * n_in, "batch shape mismatch");
        let mut grad = Gradients::zeros_like(self);
        let nl = self.layers.len();
        let mut inputs: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.n_in]).collect();
        let mut outs: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.n_out]).collect();
        let mut delta: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.n_out]).collect();
        let mut loss = 0.0;
        for s in 0..b {
            // forward
            for k in 0..nl {
                let inp = &mut inputs[k];
                if k == 0 {
                    inp.copy_from_slice(&x[s * n_in..(s + 1) * n_in]);
                } else {
                    inp.copy_from_slice(&outs[k - 1]);
                }
                if let Some(m) = masks {
                    let w = inp.len();
                    for (v, f) in inp.iter_mut().zip(&m[k][s * w..(s + 1) * w]) {
                        *v *= f;
                    }
                }
                self.layers[k].affine(&inputs[k], &mut outs[k]);
                if k + 1 < nl {
                    outs[k].iter_mut().for_each(|v| *v = sigmoid(*v));
                }
            }
            let z = outs[nl - 1][0];
            let pred = z.max(0.0);
            let err = pred - y[s];
            loss += err * err;
            delta[nl - 1][0] = if z > 0.0 { 2.0 * err / b as f64 } else { 0.0 };
            // backward
            for k in (0..nl).rev() {
                let l = &self.layers[k];
                let g = &mut grad.layers[k];
                for (j, &d) in delta[k].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[j] += d;
                    for (gw, xi) in g.weights[j * l.n_in..(j + 1) * l.n_in].iter_mut().zip(&inputs[k]) {
                        *gw += d * xi;
                    }
                }
                if k == 0 {
                    break;
                }
                let (lo, hi) = delta.split_at_mut(k);
                let prev = &mut lo[k - 1];
                prev.fill(0.0);
                for (j, &d) in hi[0].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&l.weights[j * l.n_in..(j + 1) * l.n_in]) {
                        *p += d * w;
                    }
                }
                let w = prev.len();
                let mask = masks.map(|m| &m[k][s * w..(s + 1) * w]);
                for (i, p) in prev.iter_mut().enumerate() {
                    let h = outs[k - 1][i];
                    let f = mask.map_or(1.0, |m| m[i]);
                    *p *= f * h * (1.0 - h);
                }
            }
        }
        (loss / b as f64, grad)
    }
}
