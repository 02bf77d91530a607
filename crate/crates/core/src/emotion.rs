//! Emotion labels, the emotion-to-reward mapping and the three-way emotion
//! classifier over scoped reply text.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::Confusion;
use crate::nn::{apply_update, load_checkpoint, save_checkpoint, Activation, Head, Network, OptimizerState, Target};
use crate::scope::ScopedMessage;
use crate::text::{featurize, FeatureVector, Vocabulary};
use crate::{Error, Result};

/// Sign of an emotion phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flip(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// Implicit user emotion toward the assistant's last action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Positive,
    Negative,
    Neutral,
}

impl EmotionLabel {
    /// Softmax output order of the emotion classifier.
    pub const ALL: [EmotionLabel; 3] = [EmotionLabel::Positive, EmotionLabel::Negative, EmotionLabel::Neutral];

    pub fn index(self) -> usize {
        match self {
            EmotionLabel::Positive => 0,
            EmotionLabel::Negative => 1,
            EmotionLabel::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Contract(format!("emotion index {i} out of range")))
    }

    /// The `x` of the reward cases: +1, -1 or 0.
    pub fn sign(self) -> i8 {
        match self {
            EmotionLabel::Positive => 1,
            EmotionLabel::Negative => -1,
            EmotionLabel::Neutral => 0,
        }
    }
}

impl From<Polarity> for EmotionLabel {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => EmotionLabel::Positive,
            Polarity::Negative => EmotionLabel::Negative,
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmotionLabel::Positive => "positive",
            EmotionLabel::Negative => "negative",
            EmotionLabel::Neutral => "neutral",
        })
    }
}

/// Reward for a detected emotion: +1, -1 or 0.
pub fn reward_of(label: EmotionLabel) -> f32 {
    match label {
        EmotionLabel::Positive => 1.0,
        EmotionLabel::Negative => -1.0,
        EmotionLabel::Neutral => 0.0,
    }
}

/// Three-way softmax classifier over the bag-of-words of kept sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionModel {
    net: Network,
}

/// Featurized reply text with its gold emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionExample {
    pub features: FeatureVector,
    pub label: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f32,
    pub holdout_fraction: f64,
}

impl Default for EmotionTrainConfig {
    fn default() -> Self {
        EmotionTrainConfig {
            hidden: vec![32],
            epochs: 10,
            learning_rate: 0.5,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionScores {
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionMetrics {
    pub train: EmotionScores,
    pub heldout: EmotionScores,
}

impl EmotionMetrics {
    /// `split,accuracy,macro_f1` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,accuracy,macro_f1\n");
        for (split, s) in [("train", self.train), ("heldout", self.heldout)] {
            out.push_str(&format!("{split},{:.6},{:.6}\n", s.accuracy, s.macro_f1));
        }
        out
    }
}

impl EmotionModel {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(EmotionLabel::ALL.len()))
            .collect();
        Ok(EmotionModel {
            net: Network::random(&sizes, Activation::Tanh, Head::Softmax, 1.0, rng)?,
        })
    }

    pub fn from_network(net: Network) -> Result<Self> {
        if net.head() != Head::Softmax || net.output_dim() != EmotionLabel::ALL.len() {
            return Err(Error::Config("emotion model needs a 3-way softmax head".into()));
        }
        Ok(EmotionModel { net })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Label distribution in [`EmotionLabel::ALL`] order.
    pub fn distribution(&self, features: &FeatureVector) -> Result<[f64; 3]> {
        let p = self.net.forward(features.as_slice())?;
        Ok([p[0], p[1], p[2]])
    }

    /// Argmax label; ties resolve to Neutral.
    pub fn predict(&self, features: &FeatureVector) -> Result<EmotionLabel> {
        Ok(argmax_neutral(&self.distribution(features)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(&self.net, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_network(load_checkpoint(path)?)
    }

    pub fn score(&self, examples: &[EmotionExample]) -> Result<EmotionScores> {
        let mut c = Confusion::new(3);
        for ex in examples {
            c.add(ex.label.index(), self.predict(&ex.features)?.index());
        }
        Ok(EmotionScores {
            accuracy: c.accuracy(),
            macro_f1: c.macro_f1(),
        })
    }
}

fn argmax_neutral(p: &[f64; 3]) -> EmotionLabel {
    let best = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..3).filter(|&i| p[i] == best).collect();
    match winners.as_slice() {
        [only] => EmotionLabel::ALL[*only],
        _ => EmotionLabel::Neutral,
    }
}

/// Emotion of the kept sentences of a reply. An empty scope is Neutral.
pub fn classify_emotion(
    model: &EmotionModel,
    scoped: &ScopedMessage,
    vocab: &Vocabulary,
) -> Result<(EmotionLabel, [f64; 3])> {
    let features = featurize(scoped.kept(), vocab);
    if features.is_zero() {
        return Ok((EmotionLabel::Neutral, [0.0, 0.0, 1.0]));
    }
    let p = model.distribution(&features)?;
    Ok((argmax_neutral(&p), p))
}

/// Trains on the leading part of `corpus` and scores the held-out tail.
/// Every label must occur in both parts.
pub fn train_emotion<R: Rng + ?Sized>(
    model: &mut EmotionModel,
    corpus: &[EmotionExample],
    cfg: &EmotionTrainConfig,
    rng: &mut R,
) -> Result<EmotionMetrics> {
    if corpus.is_empty() {
        return Err(Error::Empty("emotion training corpus"));
    }
    let n_hold = ((corpus.len() as f64) * cfg.holdout_fraction).round() as usize;
    let (train, heldout) = corpus.split_at(corpus.len() - n_hold.min(corpus.len() - 1));
    for (split, part) in [("training", train), ("held-out", heldout)] {
        let c = Confusion::from_pairs(3, part.iter().map(|e| (e.label.index(), 0)));
        c.require_all_classes()
            .map_err(|_| Error::Config(format!("{split} emotion data lacks a class; macro-F1 is undefined")))?;
    }
    let mut opt = OptimizerState::sgd(cfg.learning_rate)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for &i in &order {
            let ex = &train[i];
            let trace = model.net.trace(ex.features.as_slice())?;
            model.net.supervised_backward(&trace, Target::Class(ex.label.index()))?;
            apply_update(model.net.params_mut(), &mut opt)?;
        }
    }
    Ok(EmotionMetrics {
        train: model.score(train)?,
        heldout: model.score(heldout)?,
    })
}
