//! Feed-forward networks with multinomial or ordinal output heads
//! (DeepMN / DeepOR), and the token-embedding variant whose first hidden
//! layer is a significance-weighted average of token embeddings
//! (APM_MN / APM_OR).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::heads::{ordinal_cumulative, ordinal_cumulative_backward, sigmoid, softmax, LOG_EPS};
use super::Prediction;
use crate::error::{Error, Result};
use crate::outcome::{
    class_weights, Category, CategoryDistribution, ClassWeights, ThresholdProfile, N_CATEGORIES, N_THRESHOLDS,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputEncoding {
    Multinomial,
    Ordinal,
}

impl OutputEncoding {
    pub fn n_outputs(self) -> usize {
        match self {
            OutputEncoding::Multinomial => N_CATEGORIES,
            OutputEncoding::Ordinal => N_THRESHOLDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layer widths. For token models the first entry is the
    /// embedding dimension.
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub encoding: OutputEncoding,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(widths: Vec<usize>, dropout: f64, encoding: OutputEncoding) -> Self {
        MlpConfig {
            widths,
            dropout,
            encoding,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            max_epochs: 200,
            patience: 10,
            batch_size: 128,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Invalid("network needs at least one non-empty hidden layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Invalid("batch size and epoch budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InputSpec {
    Features { dim: usize },
    Tokens { vocab: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Dense {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Features(&'a [f64]),
    Tokens(&'a [u32]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub config: MlpConfig,
    pub input: InputSpec,
    dense: Vec<Dense>,
    embedding: usize,
    significance: usize,
    params: Vec<f64>,
    pub metadata: TrainingMetadata,
}

struct Cache {
    h0: Vec<f64>,
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    raw: Vec<f64>,
}

impl NeuralModel {
    /// Allocates the parameter layout and draws initial weights:
    /// U(±1/√fan_in) for dense layers, N(0,1) embeddings, zero
    /// significance logits.
    pub fn init(config: &MlpConfig, input: InputSpec) -> Result<Self> {
        config.validate()?;
        let mut offset = 0;
        let (embedding, significance, first_in, hidden_widths) = match input {
            InputSpec::Features { dim } => (0, 0, dim, &config.widths[..]),
            InputSpec::Tokens { vocab } => {
                if vocab == 0 {
                    return Err(Error::EmptyTrainingSet);
                }
                let e = config.widths[0];
                let emb = offset;
                offset += vocab * e;
                let sig = offset;
                offset += vocab;
                (emb, sig, e, &config.widths[1..])
            }
        };
        let mut dense = Vec::new();
        let mut n_in = first_in;
        for &n_out in hidden_widths.iter().chain(std::iter::once(&config.encoding.n_outputs())) {
            dense.push(Dense { w: offset, b: offset + n_in * n_out, n_in, n_out });
            offset += n_in * n_out + n_out;
            n_in = n_out;
        }
        let mut model = NeuralModel {
            config: config.clone(),
            input,
            dense,
            embedding,
            significance,
            params: vec![0.0; offset],
            metadata: TrainingMetadata { seed: config.seed, ..Default::default() },
        };
        let mut r = rng::stream(config.seed, &[rng::label("init")]);
        model.randomize(&mut r);
        Ok(model)
    }

    fn randomize(&mut self, r: &mut ChaCha8Rng) {
        if let InputSpec::Tokens { vocab } = self.input {
            let e = self.config.widths[0];
            for v in &mut self.params[self.embedding..self.embedding + vocab * e] {
                *v = StandardNormal.sample(r);
            }
            self.params[self.significance..self.significance + vocab].fill(0.0);
        }
        for d in self.dense.clone() {
            let bound = 1.0 / (d.n_in.max(1) as f64).sqrt();
            for v in &mut self.params[d.w..d.b + d.n_out] {
                *v = r.random_range(-bound..bound);
            }
        }
    }

    pub fn encoding(&self) -> OutputEncoding {
        self.config.encoding
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: p.len() });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Named flat parameter blocks, in layout order.
    pub fn named_parameters(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        if let InputSpec::Tokens { vocab } = self.input {
            let e = self.config.widths[0];
            out.push(("embedding".into(), self.params[self.embedding..self.embedding + vocab * e].to_vec()));
            out.push(("significance".into(), self.params[self.significance..self.significance + vocab].to_vec()));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("dense{i}.weight"), self.params[d.w..d.b].to_vec()));
            out.push((format!("dense{i}.bias"), self.params[d.b..d.b + d.n_out].to_vec()));
        }
        out
    }

    fn check_input(&self, input: Input) -> Result<()> {
        match (self.input, input) {
            (InputSpec::Features { dim }, Input::Features(x)) if x.len() == dim => Ok(()),
            (InputSpec::Features { dim }, Input::Features(x)) => {
                Err(Error::DimensionMismatch { expected: dim, got: x.len() })
            }
            (InputSpec::Tokens { .. }, Input::Tokens([])) => Err(Error::EmptyTokenSet),
            (InputSpec::Tokens { vocab }, Input::Tokens(t)) => match t.iter().find(|&&i| i as usize >= vocab) {
                Some(&i) => Err(Error::DimensionMismatch { expected: vocab, got: i as usize + 1 }),
                None => Ok(()),
            },
            (InputSpec::Features { dim }, Input::Tokens(_)) => {
                Err(Error::Invalid(format!("model expects {dim} features, got tokens")))
            }
            (InputSpec::Tokens { .. }, Input::Features(_)) => {
                Err(Error::Invalid("model expects tokens, got features".into()))
            }
        }
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        matches!(self.input, InputSpec::Tokens { .. }).then(|| self.config.widths[0])
    }

    pub fn token_vector(&self, token: u32) -> &[f64] {
        let e = self.config.widths[0];
        let o = self.embedding + token as usize * e;
        &self.params[o..o + e]
    }

    pub fn significance_logit(&self, token: u32) -> f64 {
        self.params[self.significance + token as usize]
    }

    /// Σ exp(s_i)·v_i / |tokens| over the given token indices.
    pub fn embed_average(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokenSet);
        }
        let e = self.embedding_dim().ok_or_else(|| Error::Invalid("not a token model".into()))?;
        Ok(embed_average_raw(&self.params, self.embedding, self.significance, e, tokens))
    }

    fn first_hidden(&self, params: &[f64], input: Input) -> Vec<f64> {
        match input {
            Input::Features(x) => x.to_vec(),
            Input::Tokens(t) => embed_average_raw(params, self.embedding, self.significance, self.config.widths[0], t),
        }
    }

    fn forward_from(&self, params: &[f64], h0: Vec<f64>, mut drop: Option<&mut ChaCha8Rng>) -> Cache {
        let n_hidden = self.dense.len() - 1;
        let mut pre = Vec::with_capacity(n_hidden);
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let p = self.config.dropout;
        for (l, d) in self.dense[..n_hidden].iter().enumerate() {
            let h = if l == 0 { &h0 } else { &acts[l - 1] };
            let a = affine(params, d, h);
            let mut out: Vec<f64> = a.iter().map(|v| v.max(0.0)).collect();
            let mask: Vec<f64> = match drop.as_deref_mut() {
                Some(r) if p > 0.0 => (0..d.n_out)
                    .map(|_| if r.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect(),
                _ => Vec::new(),
            };
            if !mask.is_empty() {
                out.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
            }
            pre.push(a);
            acts.push(out);
            masks.push(mask);
        }
        let last = self.dense.last().unwrap();
        let raw = affine(params, last, acts.last().unwrap_or(&h0));
        Cache { h0, pre, acts, masks, raw }
    }

    /// Node outputs (7 category probabilities or 6 exceedance
    /// probabilities) from a given first-hidden-layer vector.
    pub fn node_outputs_from_hidden(&self, h0: &[f64]) -> Vec<f64> {
        let c = self.forward_from(&self.params, h0.to_vec(), None);
        head_outputs(self.config.encoding, &c.raw)
    }

    pub fn node_outputs(&self, input: Input) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.node_outputs_from_hidden(&self.first_hidden(&self.params, input)))
    }

    pub fn predict(&self, input: Input) -> Result<Prediction> {
        let out = self.node_outputs(input)?;
        Ok(match self.config.encoding {
            OutputEncoding::Multinomial => {
                let mut p = [0.0; N_CATEGORIES];
                p.copy_from_slice(&out);
                Prediction::from_distribution(CategoryDistribution { p })
            }
            OutputEncoding::Ordinal => {
                let mut q = [0.0; N_THRESHOLDS];
                q.copy_from_slice(&out);
                Prediction::from_profile(ThresholdProfile { q })
            }
        })
    }

    fn backward(&self, params: &[f64], input: Input, cache: &Cache, d_raw: &[f64], grad: &mut [f64]) {
        let n_hidden = self.dense.len() - 1;
        let last = self.dense[n_hidden];
        let h_last = cache.acts.last().unwrap_or(&cache.h0);
        let mut dh = affine_backward(params, &last, h_last, d_raw, grad);
        for l in (0..n_hidden).rev() {
            let d = self.dense[l];
            if !cache.masks[l].is_empty() {
                dh.iter_mut().zip(&cache.masks[l]).for_each(|(g, m)| *g *= m);
            }
            let da: Vec<f64> = dh.iter().zip(&cache.pre[l]).map(|(g, a)| if *a > 0.0 { *g } else { 0.0 }).collect();
            let h_prev = if l == 0 { &cache.h0 } else { &cache.acts[l - 1] };
            dh = affine_backward(params, &d, h_prev, &da, grad);
        }
        if let Input::Tokens(tokens) = input {
            let e = self.config.widths[0];
            let n = tokens.len() as f64;
            for &t in tokens {
                let s = self.significance + t as usize;
                let o = self.embedding + t as usize * e;
                let scale = params[s].exp() / n;
                let mut dot = 0.0;
                for j in 0..e {
                    grad[o + j] += dh[j] * scale;
                    dot += dh[j] * params[o + j];
                }
                grad[s] += scale * dot;
            }
        }
    }

    /// Mean class-weighted loss and its gradient at parameters `params`
    /// (dropout disabled).
    pub fn loss_and_gradient_at(
        &self,
        params: &[f64],
        inputs: &[Input],
        labels: &[Category],
        weights: &ClassWeights,
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        let n = inputs.len() as f64;
        for (input, y) in inputs.iter().zip(labels) {
            let cache = self.forward_from(params, self.first_hidden(params, *input), None);
            let (l, d_raw) = loss_grad_raw(self.config.encoding, &cache.raw, *y, weights);
            loss += l / n;
            let d_raw: Vec<f64> = d_raw.iter().map(|v| v / n).collect();
            self.backward(params, *input, &cache, &d_raw, &mut grad);
        }
        (loss, grad)
    }

    pub fn loss_at(&self, params: &[f64], inputs: &[Input], labels: &[Category], weights: &ClassWeights) -> f64 {
        inputs
            .iter()
            .zip(labels)
            .map(|(input, y)| {
                let cache = self.forward_from(params, self.first_hidden(params, *input), None);
                loss_grad_raw(self.config.encoding, &cache.raw, *y, weights).0
            })
            .sum::<f64>()
            / inputs.len() as f64
    }

    /// Perturbs every parameter with N(0, scale²) noise; used to place
    /// gradient checks at random points.
    pub fn jitter(&mut self, scale: f64, seed: u64) {
        let mut r = rng::stream(seed, &[rng::label("jitter")]);
        for v in &mut self.params {
            let z: f64 = StandardNormal.sample(&mut r);
            *v += scale * z;
        }
    }
}

fn embed_average_raw(params: &[f64], emb: usize, sig: usize, e: usize, tokens: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0; e];
    let n = tokens.len() as f64;
    for &t in tokens {
        let w = params[sig + t as usize].exp();
        let v = &params[emb + t as usize * e..emb + (t as usize + 1) * e];
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn affine(params: &[f64], d: &Dense, h: &[f64]) -> Vec<f64> {
    (0..d.n_out)
        .map(|o| {
            let row = &params[d.w + o * d.n_in..d.w + (o + 1) * d.n_in];
            params[d.b + o] + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn affine_backward(params: &[f64], d: &Dense, h: &[f64], dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let mut dh = vec![0.0; d.n_in];
    for (o, &g) in dout.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad[d.b + o] += g;
        let base = d.w + o * d.n_in;
        for i in 0..d.n_in {
            grad[base + i] += g * h[i];
            dh[i] += g * params[base + i];
        }
    }
    dh
}

fn head_outputs(encoding: OutputEncoding, raw: &[f64]) -> Vec<f64> {
    match encoding {
        OutputEncoding::Multinomial => softmax(raw),
        OutputEncoding::Ordinal => ordinal_cumulative(raw).into_iter().map(sigmoid).collect(),
    }
}

/// Weighted loss for one sample and its gradient w.r.t. the raw outputs.
fn loss_grad_raw(encoding: OutputEncoding, raw: &[f64], y: Category, w: &ClassWeights) -> (f64, Vec<f64>) {
    let wy = w.get(y);
    let k = y.index();
    match encoding {
        OutputEncoding::Multinomial => {
            let p = softmax(raw);
            let py = p[k];
            let loss = -wy * (py + LOG_EPS).ln();
            let scale = -wy * py / (py + LOG_EPS);
            let d = p.iter().enumerate().map(|(j, pj)| scale * ((j == k) as u8 as f64 - pj)).collect();
            (loss, d)
        }
        OutputEncoding::Ordinal => {
            let c = ordinal_cumulative(raw);
            let mut loss = 0.0;
            let mut dc = vec![0.0; c.len()];
            for (t, &ct) in c.iter().enumerate() {
                let q = sigmoid(ct);
                let dq = if k > t {
                    loss -= (q + LOG_EPS).ln();
                    -1.0 / (q + LOG_EPS)
                } else {
                    loss -= (1.0 - q + LOG_EPS).ln();
                    1.0 / (1.0 - q + LOG_EPS)
                };
                dc[t] = wy * dq * q * (1.0 - q);
            }
            (wy * loss, ordinal_cumulative_backward(raw, &dc))
        }
    }
}

/// Training and (optional) validation data for one fit.
pub struct TrainingData<'a> {
    pub train: Vec<Input<'a>>,
    pub train_labels: &'a [Category],
    pub val: Vec<Input<'a>>,
    pub val_labels: &'a [Category],
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, cfg: &MlpConfig, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + 1e-8);
        }
    }
}

/// Mini-batch Adam on the class-weighted loss with early stopping on the
/// validation loss; returns the best-validation parameters.
pub fn fit(mut model: NeuralModel, data: &TrainingData) -> Result<NeuralModel> {
    let cfg = model.config.clone();
    if data.train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for i in data.train.iter().chain(&data.val) {
        model.check_input(*i)?;
    }
    let weights = class_weights(data.train_labels)?;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut shuffle = rng::stream(cfg.seed, &[rng::label("shuffle")]);
    let mut dropout = rng::stream(cfg.seed, &[rng::label("dropout")]);
    let mut adam = Adam { m: vec![0.0; model.params.len()], v: vec![0.0; model.params.len()], t: 0 };
    let mut best = (f64::INFINITY, model.params.clone(), 0usize);
    let mut since_best = 0;
    let mut meta = TrainingMetadata { seed: cfg.seed, ..Default::default() };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; model.params.len()];
            let n = batch.len() as f64;
            for &i in batch {
                let input = data.train[i];
                let y = data.train_labels[i];
                let h0 = model.first_hidden(&model.params, input);
                let cache = model.forward_from(&model.params, h0, Some(&mut dropout));
                let (l, d_raw) = loss_grad_raw(cfg.encoding, &cache.raw, y, &weights);
                epoch_loss += l;
                let d_raw: Vec<f64> = d_raw.iter().map(|v| v / n).collect();
                model.backward(&model.params, input, &cache, &d_raw, &mut grad);
            }
            let mut params = std::mem::take(&mut model.params);
            adam.step(&cfg, &mut params, &grad);
            model.params = params;
        }
        epoch_loss /= data.train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, detail: format!("training loss {epoch_loss}") });
        }
        meta.train_losses.push(epoch_loss);
        meta.epochs_run = epoch;

        let monitor = if data.val.is_empty() {
            epoch_loss
        } else {
            let v = model.loss_at(&model.params, &data.val, data.val_labels, &weights);
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, detail: format!("validation loss {v}") });
            }
            meta.val_losses.push(v);
            v
        };
        if monitor < best.0 {
            best = (monitor, model.params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params = best.1;
    meta.best_epoch = best.2;
    model.metadata = meta;
    Ok(model)
}

pub fn train_deep(
    x: &[Vec<f64>],
    y: &[Category],
    x_val: &[Vec<f64>],
    y_val: &[Category],
    cfg: &MlpConfig,
) -> Result<NeuralModel> {
    let dim = x.first().map(Vec::len).ok_or(Error::EmptyTrainingSet)?;
    let model = NeuralModel::init(cfg, InputSpec::Features { dim })?;
    let data = TrainingData {
        train: x.iter().map(|r| Input::Features(r)).collect(),
        train_labels: y,
        val: x_val.iter().map(|r| Input::Features(r)).collect(),
        val_labels: y_val,
    };
    fit(model, &data)
}

pub fn train_apm(
    tokens: &[Vec<u32>],
    y: &[Category],
    val_tokens: &[Vec<u32>],
    y_val: &[Category],
    vocab: usize,
    cfg: &MlpConfig,
) -> Result<NeuralModel> {
    let model = NeuralModel::init(cfg, InputSpec::Tokens { vocab })?;
    let data = TrainingData {
        train: tokens.iter().map(|t| Input::Tokens(t)).collect(),
        train_labels: y,
        val: val_tokens.iter().map(|t| Input::Tokens(t)).collect(),
        val_labels: y_val,
    };
    fit(model, &data)
}

/// Largest relative error between the analytic gradient and central
/// differences with step `h`; components are compared relative to
/// max(|analytic|, |numeric|, 1e-6).
pub fn gradient_check(model: &NeuralModel, inputs: &[Input], labels: &[Category], weights: &ClassWeights, h: f64) -> f64 {
    let p0 = model.params().to_vec();
    let (_, g) = model.loss_and_gradient_at(&p0, inputs, labels, weights);
    let mut p = p0.clone();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        p[i] = p0[i] + h;
        let fp = model.loss_at(&p, inputs, labels, weights);
        p[i] = p0[i] - h;
        let fm = model.loss_at(&p, inputs, labels, weights);
        p[i] = p0[i];
        let num = (fp - fm) / (2.0 * h);
        let rel = (num - g[i]).abs() / num.abs().max(g[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
