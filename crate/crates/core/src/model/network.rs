//! Feed-forward classifiers trained by minibatch SGD on cross-entropy.
//!
//! Logistic regression, softmax regression and the MLP share one
//! representation: a stack of dense layers, hidden activations, and either a
//! single sigmoid unit or a softmax head.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use crate::error::{Error, Result};

/// Rows per gradient chunk. Chunks are reduced in order, so results do not
/// depend on the number of worker threads.
const GRAD_CHUNK: usize = 256;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    /// One logit; probability of class 1.
    Sigmoid,
    Softmax,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weights uniform in ±1/sqrt(fan_in), zero bias.
    fn uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Layer {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs).zip(&self.bias)) {
            *o = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub input_width: usize,
    pub hidden: Vec<usize>,
    pub activations: Vec<Activation>,
    pub classes: usize,
    pub output: OutputKind,
    pub layers: Vec<Layer>,
    /// Input standardization `(x - shift) * scale`; identity by default.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ModelParams {
    /// Writes the model as JSON.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Binary logistic regression with zero weights.
    pub fn logistic(input_width: usize) -> Self {
        Self::assemble(input_width, vec![], vec![], 2, OutputKind::Sigmoid, vec![Layer::zeros(input_width, 1)])
    }

    /// Multinomial logistic regression with zero weights.
    pub fn softmax(input_width: usize, classes: usize) -> Self {
        Self::assemble(
            input_width,
            vec![],
            vec![],
            classes,
            OutputKind::Softmax,
            vec![Layer::zeros(input_width, classes)],
        )
    }

    /// ReLU MLP with a softmax head, randomly initialized.
    pub fn mlp(input_width: usize, hidden: &[usize], classes: usize, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_width;
        for &h in hidden {
            layers.push(Layer::uniform(fan_in, h, rng));
            fan_in = h;
        }
        layers.push(Layer::uniform(fan_in, classes, rng));
        Self::assemble(
            input_width,
            hidden.to_vec(),
            vec![Activation::Relu; hidden.len()],
            classes,
            OutputKind::Softmax,
            layers,
        )
    }

    fn assemble(
        input_width: usize,
        hidden: Vec<usize>,
        activations: Vec<Activation>,
        classes: usize,
        output: OutputKind,
        layers: Vec<Layer>,
    ) -> Self {
        ModelParams {
            input_width,
            hidden,
            activations,
            classes,
            output,
            layers,
            shift: vec![0.0; input_width],
            scale: vec![1.0; input_width],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights and biases, layer by layer (weights before bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let (w, b) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&flat[at..at + w]);
            l.bias.copy_from_slice(&flat[at + w..at + w + b]);
            at += w + b;
        }
    }

    fn check_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    fn workspace(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.input_width)
            .chain(self.layers.iter().map(|l| l.outputs))
            .map(|w| vec![0.0; w])
            .collect()
    }

    /// Fills `acts[0]` with the standardized input and `acts[l + 1]` with
    /// layer `l`'s activated output; the last entry holds the logits.
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) {
        for ((a, &xi), (s, c)) in acts[0].iter_mut().zip(x).zip(self.shift.iter().zip(&self.scale)) {
            *a = (xi - s) * c;
        }
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = acts.split_at_mut(l + 1);
            layer.forward(&before[l], &mut after[0]);
            if l < last {
                let act = self.activations[l];
                for v in after[0].iter_mut() {
                    *v = act.apply(*v);
                }
            }
        }
    }

    fn probabilities(&self, logits: &[f64]) -> Vec<f64> {
        match self.output {
            OutputKind::Sigmoid => {
                let p = sigmoid(logits[0]);
                vec![1.0 - p, p]
            }
            OutputKind::Softmax => softmax(logits),
        }
    }

    /// Class probabilities for one raw feature row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = self.workspace();
        self.forward_into(x, &mut acts);
        self.probabilities(acts.last().expect("output layer"))
    }

    /// Mean cross-entropy over `rows` plus `l2 / 2 * |W|^2`, and its
    /// gradient in [`Self::flatten`] layout.
    pub fn loss_gradient(&self, x: &FeatureMatrix, y: &[usize], rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let partials: Vec<(f64, Vec<f64>)> = rows
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| self.chunk_gradient(x, y, chunk))
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let n = rows.len() as f64;
        loss /= n;
        for g in &mut grad {
            *g /= n;
        }
        if l2 > 0.0 {
            let mut at = 0;
            for layer in &self.layers {
                for (g, w) in grad[at..at + layer.weights.len()].iter_mut().zip(&layer.weights) {
                    *g += l2 * w;
                    loss += 0.5 * l2 * w * w;
                }
                at += layer.weights.len() + layer.bias.len();
            }
        }
        (loss, grad)
    }

    /// Objective of [`Self::loss_gradient`] without the gradient.
    pub fn loss(&self, x: &FeatureMatrix, y: &[usize], rows: &[usize], l2: f64) -> f64 {
        let mut acts = self.workspace();
        let mut total = 0.0;
        for &r in rows {
            self.forward_into(x.row(r), &mut acts);
            total += self.row_loss(acts.last().unwrap(), y[r]);
        }
        let mut loss = total / rows.len() as f64;
        if l2 > 0.0 {
            loss += 0.5 * l2 * self.layers.iter().flat_map(|l| &l.weights).map(|w| w * w).sum::<f64>();
        }
        loss
    }

    fn row_loss(&self, logits: &[f64], label: usize) -> f64 {
        match self.output {
            OutputKind::Sigmoid => softplus(logits[0]) - if label == 1 { logits[0] } else { 0.0 },
            OutputKind::Softmax => log_sum_exp(logits) - logits[label],
        }
    }

    fn chunk_gradient(&self, x: &FeatureMatrix, y: &[usize], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut acts = self.workspace();
        let mut grad = vec![0.0; self.param_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |at, l| {
                let start = *at;
                *at += l.weights.len() + l.bias.len();
                Some(start)
            })
            .collect();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = Vec::new();
        let mut prev: Vec<f64> = Vec::new();

        for &r in rows {
            self.forward_into(x.row(r), &mut acts);
            let logits = acts.last().unwrap();
            loss += self.row_loss(logits, y[r]);

            // dL/dlogits = p - onehot(y) for both heads.
            delta.clear();
            match self.output {
                OutputKind::Sigmoid => delta.push(sigmoid(logits[0]) - if y[r] == 1 { 1.0 } else { 0.0 }),
                OutputKind::Softmax => {
                    delta.extend(softmax(logits));
                    delta[y[r]] -= 1.0;
                }
            }

            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let g = &mut grad[offsets[l]..offsets[l] + layer.weights.len() + layer.bias.len()];
                let (gw, gb) = g.split_at_mut(layer.weights.len());
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (gwi, &xi) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                        *gwi += d * xi;
                    }
                    gb[o] += d;
                }
                if l == 0 {
                    break;
                }
                prev.clear();
                prev.resize(layer.inputs, 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                        *p += d * w;
                    }
                }
                let act = self.activations[l - 1];
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= act.grad_from_output(a);
                }
                std::mem::swap(&mut delta, &mut prev);
            }
        }
        (loss, grad)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub l2: f64,
    pub rng_seed: u64,
    /// Down-sample every class to the size of the smallest one.
    pub balance_classes: bool,
    /// Z-score inputs with training-set statistics stored in the model.
    pub standardize: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 0.1,
            epochs: 4,
            minibatch: 3000,
            l2: 0.0,
            rng_seed: 1,
            balance_classes: false,
            standardize: true,
        }
    }
}

/// A fitted model and the mean minibatch loss of each epoch.
#[derive(Clone, Debug)]
pub struct Trained {
    pub params: ModelParams,
    pub epoch_losses: Vec<f64>,
}

/// Default hidden layout: three layers of 256.
pub const DEFAULT_HIDDEN: [usize; 3] = [256, 256, 256];

/// Logistic regression for two classes, softmax regression for more.
pub fn train_logistic(x: &FeatureMatrix, y: &[usize], classes: usize, hyper: &TrainParams) -> Result<Trained> {
    validate(x, y, classes, hyper)?;
    let params = if classes == 2 {
        ModelParams::logistic(x.width())
    } else {
        ModelParams::softmax(x.width(), classes)
    };
    fit(params, x, y, hyper)
}

pub fn train_mlp(
    x: &FeatureMatrix,
    y: &[usize],
    classes: usize,
    hidden: &[usize],
    hyper: &TrainParams,
) -> Result<Trained> {
    validate(x, y, classes, hyper)?;
    if hidden.contains(&0) {
        return Err(Error::config("hidden layer sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let params = ModelParams::mlp(x.width(), hidden, classes, &mut rng);
    fit(params, x, y, hyper)
}

fn validate(x: &FeatureMatrix, y: &[usize], classes: usize, hyper: &TrainParams) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::validation("need at least two training rows"));
    }
    if classes < 2 {
        return Err(Error::config("need at least two classes"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::validation(format!("label {bad} outside [0,{classes})")));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::validation("training labels contain a single class"));
    }
    if hyper.epochs == 0 || hyper.minibatch == 0 {
        return Err(Error::config("epochs and minibatch must be positive"));
    }
    if !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0 {
        return Err(Error::config("learning rate must be positive and l2 non-negative"));
    }
    Ok(())
}

fn fit(mut params: ModelParams, x: &FeatureMatrix, y: &[usize], hyper: &TrainParams) -> Result<Trained> {
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed ^ 0x5eed_5eed);
    let mut rows: Vec<usize> = (0..x.rows()).collect();
    if hyper.balance_classes {
        rows = balanced_rows(y, params.classes, &mut rng);
    }
    if hyper.standardize {
        standardize(&mut params, x, &rows);
    }

    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let mut flat = params.flatten();
    for epoch in 1..=hyper.epochs {
        rows.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in rows.chunks(hyper.minibatch) {
            let (loss, grad) = params.loss_gradient(x, y, batch, hyper.l2);
            total += loss * batch.len() as f64;
            for (p, g) in flat.iter_mut().zip(&grad) {
                *p -= hyper.learning_rate * g;
            }
            params.set_flat(&flat);
        }
        let mean = total / rows.len() as f64;
        if !mean.is_finite() || !params.check_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(Trained { params, epoch_losses })
}

fn balanced_rows(y: &[usize], classes: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    let smallest = by_class.iter().map(Vec::len).filter(|&n| n > 0).min().unwrap_or(0);
    let mut rows = Vec::with_capacity(smallest * classes);
    for mut members in by_class {
        members.shuffle(rng);
        members.truncate(smallest);
        rows.extend(members);
    }
    rows.sort_unstable();
    rows
}

fn standardize(params: &mut ModelParams, x: &FeatureMatrix, rows: &[usize]) {
    let n = rows.len() as f64;
    for c in 0..x.width() {
        let mean = rows.iter().map(|&r| x.row(r)[c]).sum::<f64>() / n;
        let var = rows.iter().map(|&r| (x.row(r)[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        params.shift[c] = mean;
        params.scale[c] = if sd > 1e-12 { 1.0 / sd } else { 1.0 };
    }
}

/// Class-probability rows for every feature row.
pub fn predict(params: &ModelParams, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    if x.width() != params.input_width {
        return Err(Error::Shape {
            expected: params.input_width,
            found: x.width(),
        });
    }
    Ok((0..x.rows())
        .into_par_iter()
        .map(|r| params.forward(x.row(r)))
        .collect())
}
