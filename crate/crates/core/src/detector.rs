//! A small feed-forward binary classifier (ReLU hidden layers, logistic
//! output) trained with Adam on binary cross-entropy. Parameters are plain
//! vectors so gradients can be checked numerically.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{auroc, f1_score};
use crate::points::PointSet;
use crate::rng::{domain, RandomStream};

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// `weights[i * outputs + j]` connects input `i` to output `j`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    layers: Vec<Dense>,
}

impl DetectorModel {
    /// Glorot-uniform weights, zero biases. `layer_sizes` runs from the input
    /// width to the single output unit.
    pub fn new(layer_sizes: &[usize], rng: &mut RandomStream) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes)?;
        for layer in &mut model.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = limit * (2.0 * rng.uniform() - 1.0);
            }
        }
        Ok(model)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a detector needs an input and an output layer"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if layer_sizes[layer_sizes.len() - 1] != 1 {
            return Err(Error::invalid("the output layer must have exactly one unit"));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self { layers })
    }

    /// Rebuilds a model from its layer sizes and flat parameter vector
    /// (per layer: weights input-major, then biases).
    pub fn from_parameters(layer_sizes: &[usize], params: &[f64]) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes)?;
        if params.len() != model.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                model.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        model.set_parameters(params);
        Ok(model)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    fn set_parameters(&mut self, params: &[f64]) {
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = tail;
        }
    }

    fn param_mut(&mut self, mut p: usize) -> &mut f64 {
        for l in &mut self.layers {
            if p < l.weights.len() {
                return &mut l.weights[p];
            }
            p -= l.weights.len();
            if p < l.biases.len() {
                return &mut l.biases[p];
            }
            p -= l.biases.len();
        }
        panic!("parameter index out of range")
    }

    /// Output logit for one input; `acts` receives every layer's output
    /// (hidden ones after ReLU).
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (before, after) = acts.split_at_mut(k);
            let input = if k == 0 { x } else { &before[k - 1] };
            let out = &mut after[0];
            layer.forward(input, out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        acts[last][0]
    }

    fn scratch(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| vec![0.0; l.outputs]).collect()
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has dimension {dim}, detector expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Probability that `x` is OOD.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let mut acts = self.scratch();
        Ok(logistic(self.forward_into(x, &mut acts)))
    }

    pub fn predict_batch(&self, data: &PointSet) -> Result<Vec<f64>> {
        self.check_input(data.dim())?;
        let mut acts = self.scratch();
        Ok(data
            .rows()
            .map(|x| logistic(self.forward_into(x, &mut acts)))
            .collect())
    }

    /// Mean binary cross-entropy over the rows `indices` of `data`.
    fn loss_on(&self, data: &PointSet, labels: &[u8], indices: &[usize]) -> f64 {
        let mut acts = self.scratch();
        let total: f64 = indices
            .iter()
            .map(|&i| bce_from_logit(self.forward_into(data.row(i), &mut acts), labels[i]))
            .sum();
        total / indices.len() as f64
    }

    /// Mean loss and its gradient (same layout as [`Self::parameters`]).
    pub fn loss_and_gradient(&self, data: &PointSet, labels: &[u8]) -> Result<(f64, Vec<f64>)> {
        self.check_input(data.dim())?;
        check_labels(data, labels)?;
        if data.is_empty() {
            return Err(Error::invalid("gradient needs a nonempty batch"));
        }
        let indices: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.param_count()];
        let mut scratch = Backprop::new(self);
        let loss = scratch.accumulate(self, data, labels, &indices, &mut grad);
        Ok((loss, grad))
    }
}

struct Backprop {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

impl Backprop {
    fn new(model: &DetectorModel) -> Self {
        let mut offsets = Vec::with_capacity(model.layers.len());
        let mut at = 0;
        for l in &model.layers {
            offsets.push(at);
            at += l.param_count();
        }
        Self {
            acts: model.scratch(),
            deltas: model.scratch(),
            offsets,
        }
    }

    /// Adds the gradient of the mean loss over `indices` into `grad` and
    /// returns that mean loss.
    fn accumulate(
        &mut self,
        model: &DetectorModel,
        data: &PointSet,
        labels: &[u8],
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let scale = 1.0 / indices.len() as f64;
        let last = model.layers.len() - 1;
        let mut loss = 0.0;
        for &s in indices {
            let x = data.row(s);
            let y = labels[s];
            let logit = model.forward_into(x, &mut self.acts);
            loss += bce_from_logit(logit, y);
            self.deltas[last][0] = (logistic(logit) - y as f64) * scale;

            for k in (0..=last).rev() {
                let layer = &model.layers[k];
                let input: &[f64] = if k == 0 { x } else { &self.acts[k - 1] };
                let (lower, upper) = self.deltas.split_at_mut(k);
                let delta = &upper[0];
                let g = &mut grad[self.offsets[k]..self.offsets[k] + layer.param_count()];
                let (gw, gb) = g.split_at_mut(layer.weights.len());
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &mut gw[i * layer.outputs..(i + 1) * layer.outputs];
                    for (gwij, d) in row.iter_mut().zip(delta) {
                        *gwij += xi * d;
                    }
                }
                for (gbj, d) in gb.iter_mut().zip(delta) {
                    *gbj += d;
                }
                if k > 0 {
                    let below = &mut lower[k - 1];
                    for (i, bd) in below.iter_mut().enumerate() {
                        if input[i] <= 0.0 {
                            *bd = 0.0;
                            continue;
                        }
                        let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                        *bd = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    }
                }
            }
        }
        loss * scale
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-y ln p - (1 - y) ln(1 - p)` with `p = logistic(z)`, evaluated stably.
fn bce_from_logit(z: f64, y: u8) -> f64 {
    z.max(0.0) - z * y as f64 + (-z.abs()).exp().ln_1p()
}

fn check_labels(data: &PointSet, labels: &[u8]) -> Result<()> {
    if data.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            data.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|l| *l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of each class used for training; the rest is held out.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie strictly between 0 and 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("invalid optimizer settings"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub f1_test: f64,
    pub auroc_test: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<u8>,
}

/// Stratified split, Adam mini-batch training, held-out F1 (threshold 0.5)
/// and AUROC.
pub fn train_detector(data: &PointSet, labels: &[u8], config: &TrainConfig) -> Result<(DetectorModel, TrainReport)> {
    config.validate()?;
    check_labels(data, labels)?;
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if positives.len() < 2 || negatives.len() < 2 {
        return Err(Error::invalid(
            "training needs at least two samples of each class",
        ));
    }

    let mut rng = RandomStream::new(config.seed, domain::DETECTOR);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for mut class in [negatives, positives] {
        class.shuffle(&mut rng);
        let n_train = ((class.len() as f64 * config.train_fraction).round() as usize).clamp(1, class.len() - 1);
        test.extend_from_slice(&class[n_train..]);
        class.truncate(n_train);
        train.extend(class);
    }

    let mut sizes = vec![data.dim()];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut model = DetectorModel::new(&sizes, &mut rng)?;
    let mut adam = Adam::new(model.param_count(), config);
    let mut grad = vec![0.0; model.param_count()];
    let mut backprop = Backprop::new(&model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = backprop.accumulate(&model, data, labels, batch, &mut grad);
            total += loss * batch.len() as f64;
            adam.step(&mut model, &grad);
        }
        let mean = total / train.len() as f64;
        if !mean.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }

    let test_set = data.select(&test);
    let test_labels: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
    let test_scores = model.predict_batch(&test_set)?;
    let predictions: Vec<u8> = test_scores.iter().map(|p| (*p >= 0.5) as u8).collect();
    let report = TrainReport {
        f1_test: f1_score(&predictions, &test_labels)?.value,
        auroc_test: auroc(&test_scores, &test_labels)?,
        train_size: train.len(),
        test_size: test.len(),
        epoch_losses,
        test_scores,
        test_labels,
    };
    Ok((model, report))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(n: usize, c: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
        }
    }

    fn step(&mut self, model: &mut DetectorModel, grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut p = 0;
        for layer in &mut model.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                let g = grad[p];
                self.m[p] = self.beta1 * self.m[p] + (1.0 - self.beta1) * g;
                self.v[p] = self.beta2 * self.v[p] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[p] / c1;
                let v_hat = self.v[p] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                p += 1;
            }
        }
    }
}

const FD_STEP: f64 = 1e-5;
const CHECKED_PARAMS: usize = 256;

/// Largest relative difference between analytic and central finite-difference
/// gradients over a random subset of parameters (all of them when the model
/// has at most 256). Relative error uses `max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check(model: &DetectorModel, batch: &PointSet, labels: &[u8], rng: &mut RandomStream) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradient(batch, labels)?;
    let n = model.param_count();
    let chosen: Vec<usize> = if n <= CHECKED_PARAMS {
        (0..n).collect()
    } else {
        index::sample(rng, n, CHECKED_PARAMS).into_vec()
    };
    let all: Vec<usize> = (0..batch.len()).collect();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for p in chosen {
        let original = *probe.param_mut(p);
        *probe.param_mut(p) = original + FD_STEP;
        let plus = probe.loss_on(batch, labels, &all);
        *probe.param_mut(p) = original - FD_STEP;
        let minus = probe.loss_on(batch, labels, &all);
        *probe.param_mut(p) = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let denom = analytic[p].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[p] - numeric).abs() / denom);
    }
    Ok(worst)
}
