//! Dense ReLU network with a sigmoid (binary) or linear (Q-value) head.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    SigmoidBinary,
    LinearQ,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Parameters of a multilayer perceptron. Weight matrices are stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    head: OutputHead,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradients (or any per-parameter quantity) shaped like a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    fn same_shape(&self, model: &MlpModel) -> bool {
        self.weights.len() == model.weights.len()
            && self.weights.iter().zip(&model.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&model.biases).all(|(a, b)| a.dim() == b.dim())
    }
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input followed by every hidden activation (post-ReLU).
    acts: Vec<Array2<f64>>,
    /// Pre-head outputs of the last layer.
    pub logits: Array2<f64>,
}

impl MlpModel {
    /// He-uniform initialization from `seed`; biases start at zero.
    pub fn new(input: usize, hidden: &[usize], output: usize, head: OutputHead, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(input, hidden, output, head)?;
        let mut rng = rng_from(seed);
        for w in &mut model.weights {
            let bound = (6.0 / w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        Ok(model)
    }

    pub fn zeros(input: usize, hidden: &[usize], output: usize, head: OutputHead) -> Result<Self> {
        if !(1..=3).contains(&hidden.len()) {
            return Err(Error::Config(format!("expected 1 to 3 hidden layers, got {}", hidden.len())));
        }
        if input == 0 || output == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let weights = sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self { sizes, head, weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters in layer order (weights row-major, then biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!("{} parameters for a model of {}", flat.len(), self.n_params())));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// Adds `delta` to the `index`-th flattened parameter.
    pub fn nudge(&mut self, index: usize, delta: f64) {
        let mut i = index;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if i < w.len() {
                let cols = w.ncols();
                w[(i / cols, i % cols)] += delta;
                return;
            }
            i -= w.len();
            if i < b.len() {
                b[i] += delta;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: cols });
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len());
        acts.push(x.to_owned());
        for l in 0..last {
            let mut h = acts[l].dot(&self.weights[l]);
            h += &self.biases[l];
            h.mapv_inplace(|v| v.max(0.0));
            acts.push(h);
        }
        let mut logits = acts[last].dot(&self.weights[last]);
        logits += &self.biases[last];
        Ok(ForwardCache { acts, logits })
    }

    /// Head outputs for a batch: probabilities or Q-values.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = self.forward_cached(x)?.logits;
        if self.head == OutputHead::SigmoidBinary {
            out.mapv_inplace(sigmoid);
        }
        Ok(out)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(view)?.row(0).to_vec())
    }

    /// Backpropagates `d_logits` (∂L/∂logits) through a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_logits: Array2<f64>) -> Gradients {
        let n_layers = self.weights.len();
        let mut grads = Gradients { weights: Vec::with_capacity(n_layers), biases: Vec::with_capacity(n_layers) };
        let mut dz = d_logits;
        for l in (0..n_layers).rev() {
            grads.weights.push(cache.acts[l].t().dot(&dz));
            grads.biases.push(dz.sum_axis(Axis(0)));
            if l > 0 {
                let mut da = dz.dot(&self.weights[l].t());
                ndarray::Zip::from(&mut da).and(&cache.acts[l]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = da;
            }
        }
        grads.weights.reverse();
        grads.biases.reverse();
        grads
    }

    /// Mean binary cross-entropy of a sigmoid-head model and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<(f64, Gradients)> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if y.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if self.output_dim() != 1 || self.head != OutputHead::SigmoidBinary {
            return Err(Error::Config("cross-entropy needs a single sigmoid output".into()));
        }
        let cache = self.forward_cached(x)?;
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut dz = Array2::zeros((y.len(), 1));
        for (i, &t) in y.iter().enumerate() {
            let z = cache.logits[(i, 0)];
            loss += softplus(z) - t * z;
            dz[(i, 0)] = (sigmoid(z) - t) / n;
        }
        Ok((loss / n, self.backward(&cache, dz)))
    }

    pub fn loss(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<f64> {
        let logits = self.forward_cached(x)?.logits;
        let n = y.len() as f64;
        Ok(y.iter().enumerate().map(|(i, &t)| softplus(logits[(i, 0)]) - t * logits[(i, 0)]).sum::<f64>() / n)
    }

    pub(crate) fn check_grad_shape(&self, g: &Gradients) -> Result<()> {
        if g.same_shape(self) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("gradients do not match the model".into()))
        }
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = (&mut Array2<f64>, &mut Array1<f64>)> {
        self.weights.iter_mut().zip(self.biases.iter_mut())
    }

    /// Mean absolute outgoing weight of every input unit.
    pub fn input_importance(&self) -> Vec<f64> {
        self.weights[0].rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64).collect()
    }
}
