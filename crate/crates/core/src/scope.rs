//! Sentence scoping: decides which sentences of a message concern the
//! assistant's task (task content, or emotion aimed at the task) and
//! discards the rest.
//!
//! Each sentence is embedded as the mean of its token embeddings. A linear
//! mixer then combines every sentence vector with its neighbors within
//! `window` positions (missing neighbors contribute zero), followed by a
//! `tanh` and a per-sentence logistic classifier.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::metrics::{binary_scores, BinaryScores};
use crate::nn::{apply_update, load_tensors, save_tensors, OptimizerState, ParamTensor};
use crate::text::Sentence;
use crate::{Error, Result};

pub const KEEP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeModel {
    /// `[vocab, dim]`
    embedding: ParamTensor,
    /// One `[dim, dim]` matrix per neighbor offset `-window..=window`.
    mix: Vec<ParamTensor>,
    mix_bias: ParamTensor,
    /// `[1, dim]`
    head: ParamTensor,
    head_bias: ParamTensor,
    window: usize,
}

/// A message with the scope decision attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopedMessage {
    pub sentences: Vec<Sentence>,
    pub keep_mask: Vec<bool>,
}

impl ScopedMessage {
    pub fn empty() -> Self {
        ScopedMessage {
            sentences: Vec::new(),
            keep_mask: Vec::new(),
        }
    }

    /// Everything kept; the unscoped baseline.
    pub fn keep_all(sentences: Vec<Sentence>) -> Self {
        let keep_mask = vec![true; sentences.len()];
        ScopedMessage { sentences, keep_mask }
    }

    pub fn with_mask(sentences: Vec<Sentence>, keep_mask: Vec<bool>) -> Result<Self> {
        if sentences.len() != keep_mask.len() {
            return Err(Error::Dimension {
                expected: sentences.len(),
                actual: keep_mask.len(),
            });
        }
        Ok(ScopedMessage { sentences, keep_mask })
    }

    /// Retained sentences in their original order.
    pub fn kept(&self) -> impl Iterator<Item = &Sentence> {
        self.sentences
            .iter()
            .zip(&self.keep_mask)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s)
    }

    pub fn is_empty(&self) -> bool {
        !self.keep_mask.iter().any(|&k| k)
    }
}

/// Sentences of one message with their relevance labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeExample {
    pub sentences: Vec<Sentence>,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeTrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    /// Trailing share of the corpus held out for evaluation.
    pub holdout_fraction: f64,
}

impl Default for ScopeTrainConfig {
    fn default() -> Self {
        ScopeTrainConfig {
            epochs: 8,
            learning_rate: 0.5,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeMetrics {
    /// Mean per-sentence training BCE before training and after each epoch.
    pub train_loss: Vec<f64>,
    pub heldout: BinaryScores,
    pub warnings: Vec<String>,
}

struct Pass {
    /// Sentence vectors (mean embeddings).
    h: Vec<Vec<f64>>,
    /// Mixed, squashed context vectors.
    c: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

impl ScopeModel {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, window: usize, rng: &mut R) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::Config(
                "scope model needs a vocabulary and a positive dimension".into(),
            ));
        }
        let mut embedding = ParamTensor::zeros("embedding", vec![vocab_size, dim]);
        embedding.values.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        let limit = (3.0 / dim as f32).sqrt();
        let mix = offsets(window)
            .map(|k| {
                let mut m = ParamTensor::zeros(mix_name(k), vec![dim, dim]);
                m.values.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
                m
            })
            .collect();
        let mut head = ParamTensor::zeros("head.weight", vec![1, dim]);
        head.values.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
        Ok(ScopeModel {
            embedding,
            mix,
            mix_bias: ParamTensor::zeros("mix.bias", vec![dim]),
            head,
            head_bias: ParamTensor::zeros("head.bias", vec![1]),
            window,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.embedding.shape[1]
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.shape[0]
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        std::iter::once(&mut self.embedding).chain(self.mix.iter_mut()).chain([
            &mut self.mix_bias,
            &mut self.head,
            &mut self.head_bias,
        ])
    }

    fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        std::iter::once(&self.embedding)
            .chain(self.mix.iter())
            .chain([&self.mix_bias, &self.head, &self.head_bias])
    }

    fn sentence_vector(&self, s: &Sentence) -> Vec<f64> {
        let dim = self.dim();
        let mut h = vec![0.0f64; dim];
        let ids: Vec<usize> = s
            .token_ids
            .iter()
            .map(|&t| t as usize)
            .filter(|&t| t < self.vocab_size())
            .collect();
        if ids.is_empty() {
            return h;
        }
        for &t in &ids {
            let row = &self.embedding.values[t * dim..(t + 1) * dim];
            h.iter_mut().zip(row).for_each(|(a, &e)| *a += f64::from(e));
        }
        let n = ids.len() as f64;
        h.iter_mut().for_each(|a| *a /= n);
        h
    }

    fn run(&self, sentences: &[Sentence]) -> Pass {
        let dim = self.dim();
        let w = self.window as isize;
        let h: Vec<Vec<f64>> = sentences.iter().map(|s| self.sentence_vector(s)).collect();
        let n = h.len() as isize;
        let c: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut u: Vec<f64> = self.mix_bias.values.iter().map(|&b| f64::from(b)).collect();
                for (m, k) in self.mix.iter().zip(-w..=w) {
                    let j = i + k;
                    if j < 0 || j >= n {
                        continue;
                    }
                    let hj = &h[j as usize];
                    for (o, acc) in u.iter_mut().enumerate() {
                        let row = &m.values[o * dim..(o + 1) * dim];
                        *acc += row.iter().zip(hj).map(|(&a, &b)| f64::from(a) * b).sum::<f64>();
                    }
                }
                u.into_iter().map(f64::tanh).collect()
            })
            .collect();
        let scores = c
            .iter()
            .map(|ci| {
                let z = f64::from(self.head_bias.values[0])
                    + self
                        .head
                        .values
                        .iter()
                        .zip(ci)
                        .map(|(&v, &x)| f64::from(v) * x)
                        .sum::<f64>();
                crate::nn::sigmoid(z)
            })
            .collect();
        Pass { h, c, scores }
    }

    /// Relevance probability of every sentence.
    pub fn scores(&self, sentences: &[Sentence]) -> Vec<f64> {
        self.run(sentences).scores
    }

    /// Keeps sentences scoring at least [`KEEP_THRESHOLD`].
    pub fn scope(&self, sentences: &[Sentence]) -> ScopedMessage {
        let keep_mask = self
            .scores(sentences)
            .into_iter()
            .map(|s| s >= KEEP_THRESHOLD)
            .collect();
        ScopedMessage {
            sentences: sentences.to_vec(),
            keep_mask,
        }
    }

    /// Mean per-sentence binary cross-entropy.
    pub fn loss(&self, ex: &ScopeExample) -> f64 {
        let scores = self.scores(&ex.sentences);
        if scores.is_empty() {
            return 0.0;
        }
        scores
            .iter()
            .zip(&ex.labels)
            .map(|(&s, &y)| {
                let s = s.clamp(1e-12, 1.0 - 1e-12);
                if y {
                    -s.ln()
                } else {
                    -(1.0 - s).ln()
                }
            })
            .sum::<f64>()
            / scores.len() as f64
    }

    /// Accumulates the gradient of the summed per-sentence BCE.
    pub fn backward(&mut self, ex: &ScopeExample) -> Result<()> {
        if ex.sentences.len() != ex.labels.len() {
            return Err(Error::Dimension {
                expected: ex.sentences.len(),
                actual: ex.labels.len(),
            });
        }
        let dim = self.dim();
        let w = self.window as isize;
        let pass = self.run(&ex.sentences);
        let n = pass.h.len() as isize;
        let mut du: Vec<Vec<f64>> = Vec::with_capacity(pass.c.len());
        for (i, ci) in pass.c.iter().enumerate() {
            let dz = pass.scores[i] - if ex.labels[i] { 1.0 } else { 0.0 };
            self.head_bias.grad[0] += dz as f32;
            for (g, &x) in self.head.grad.iter_mut().zip(ci) {
                *g += (dz * x) as f32;
            }
            du.push(
                ci.iter()
                    .zip(&self.head.values)
                    .map(|(&x, &v)| dz * f64::from(v) * (1.0 - x * x))
                    .collect(),
            );
        }
        let mut dh = vec![vec![0.0f64; dim]; pass.h.len()];
        for i in 0..n {
            let dui = &du[i as usize];
            for (g, &d) in self.mix_bias.grad.iter_mut().zip(dui) {
                *g += d as f32;
            }
            for (m, k) in self.mix.iter_mut().zip(-w..=w) {
                let j = i + k;
                if j < 0 || j >= n {
                    continue;
                }
                let hj = &pass.h[j as usize];
                for (o, &d) in dui.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let grow = &mut m.grad[o * dim..(o + 1) * dim];
                    for (g, &x) in grow.iter_mut().zip(hj) {
                        *g += (d * x) as f32;
                    }
                    let vrow = &m.values[o * dim..(o + 1) * dim];
                    for (acc, &v) in dh[j as usize].iter_mut().zip(vrow) {
                        *acc += d * f64::from(v);
                    }
                }
            }
        }
        for (s, dhj) in ex.sentences.iter().zip(&dh) {
            let ids: Vec<usize> = s
                .token_ids
                .iter()
                .map(|&t| t as usize)
                .filter(|&t| t < self.vocab_size())
                .collect();
            if ids.is_empty() {
                continue;
            }
            let scale = 1.0 / ids.len() as f64;
            for t in ids {
                let row = &mut self.embedding.grad[t * dim..(t + 1) * dim];
                for (g, &d) in row.iter_mut().zip(dhj) {
                    *g += (d * scale) as f32;
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, examples: &[ScopeExample]) -> BinaryScores {
        binary_scores(examples.iter().flat_map(|ex| {
            let mask = self.scope(&ex.sentences).keep_mask;
            ex.labels.iter().copied().zip(mask).collect::<Vec<_>>()
        }))
    }

    /// Flat tensor list for the checkpoint format.
    pub fn to_tensors(&self) -> Vec<ParamTensor> {
        self.params()
            .map(|p| {
                let mut p = p.clone();
                p.zero_grad();
                p
            })
            .collect()
    }

    pub fn from_tensors(tensors: Vec<ParamTensor>) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("scope model: {m}"));
        let mut it = tensors.into_iter();
        let embedding = it
            .next()
            .filter(|t| t.name == "embedding")
            .ok_or_else(|| bad("missing embedding"))?;
        let rest: Vec<ParamTensor> = it.collect();
        if rest.len() < 4 || !rest.len().is_multiple_of(2) {
            return Err(bad("unexpected tensor count"));
        }
        let n_mix = rest.len() - 3;
        let window = (n_mix - 1) / 2;
        let mut rest = rest.into_iter();
        let mix: Vec<ParamTensor> = rest.by_ref().take(n_mix).collect();
        for (m, k) in mix.iter().zip(offsets(window)) {
            if m.name != mix_name(k) {
                return Err(bad(&format!("expected {} got {}", mix_name(k), m.name)));
            }
        }
        let (mix_bias, head, head_bias) = (
            rest.next().expect("counted"),
            rest.next().expect("counted"),
            rest.next().expect("counted"),
        );
        let dim = embedding.shape.get(1).copied().unwrap_or(0);
        let ok = embedding.shape.len() == 2
            && mix.iter().all(|m| m.shape == [dim, dim])
            && mix_bias.name == "mix.bias"
            && mix_bias.shape == [dim]
            && head.name == "head.weight"
            && head.shape == [1, dim]
            && head_bias.name == "head.bias"
            && head_bias.shape == [1];
        if !ok {
            return Err(bad("tensor shapes or names do not match"));
        }
        Ok(ScopeModel {
            embedding,
            mix,
            mix_bias,
            head,
            head_bias,
            window,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_tensors(path, &self.to_tensors())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensors(load_tensors(path)?)
    }
}

fn offsets(window: usize) -> impl Iterator<Item = isize> {
    let w = window as isize;
    -w..=w
}

fn mix_name(k: isize) -> String {
    if k > 0 {
        format!("mix.+{k}")
    } else {
        format!("mix.{k}")
    }
}

/// Trains on the leading part of `corpus`, evaluates on the held-out tail.
pub fn train_scope<R: Rng + ?Sized>(
    model: &mut ScopeModel,
    corpus: &[ScopeExample],
    cfg: &ScopeTrainConfig,
    rng: &mut R,
) -> Result<ScopeMetrics> {
    if corpus.is_empty() {
        return Err(Error::Empty("scope training corpus"));
    }
    let n_hold = ((corpus.len() as f64) * cfg.holdout_fraction).round() as usize;
    let n_hold = n_hold.min(corpus.len() - 1);
    let (train, heldout) = corpus.split_at(corpus.len() - n_hold);
    let mut opt = OptimizerState::sgd(cfg.learning_rate)?;
    let mean_loss = |m: &ScopeModel| train.iter().map(|ex| m.loss(ex)).sum::<f64>() / train.len() as f64;
    let mut train_loss = vec![mean_loss(model)];
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for &i in &order {
            model.backward(&train[i])?;
            apply_update(model.params_mut(), &mut opt)?;
        }
        train_loss.push(mean_loss(model));
    }
    let mut warnings = Vec::new();
    let early = &train_loss[..train_loss.len().min(4)];
    if early.windows(2).any(|w| w[1] >= w[0]) {
        let msg = format!("scope training loss not monotonically decreasing early: {early:?}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let eval_set = if heldout.is_empty() { train } else { heldout };
    Ok(ScopeMetrics {
        train_loss,
        heldout: model.evaluate(eval_set),
        warnings,
    })
}
