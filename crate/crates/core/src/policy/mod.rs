//! Intent policies: a softmax over the three multi-class actions, or six
//! independent Bernoulli heads for the multi-label action vector. Actions
//! are sampled on-policy and updated with REINFORCE from emotion rewards.

mod action;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use action::*;

use crate::env::InteractionRecord;
use crate::nn::{
    apply_update, load_checkpoint, save_checkpoint, Activation, Head, Network, OptimizerState, Target, Trace,
};
use crate::text::FeatureVector;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "policy.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub activation: String,
    /// SGD step of the multi-class head.
    pub learning_rate: f32,
    /// SGD step of each multi-label head. Joint rewards over six heads are
    /// far noisier per head, and larger steps collapse them onto one combo.
    pub multilabel_learning_rate: f32,
    pub momentum: f32,
    /// Scale of the initial output layer; small values start near uniform.
    pub output_gain: f32,
    /// Interactions whose gradients are summed before one update.
    pub batch_size: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: vec![32],
            activation: "tanh".into(),
            learning_rate: 0.05,
            multilabel_learning_rate: 0.02,
            momentum: 0.0,
            output_gain: 0.1,
            batch_size: 1,
        }
    }
}

impl PolicyConfig {
    pub fn activation(&self) -> Result<Activation> {
        Activation::from_tag(&self.activation)
            .ok_or_else(|| Error::Config(format!("unknown activation {:?}", self.activation)))
    }

    pub fn validate(&self) -> Result<()> {
        self.activation()?;
        OptimizerState::with_momentum(self.learning_rate, self.momentum)?;
        OptimizerState::with_momentum(self.multilabel_learning_rate, self.momentum)?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn learning_rate_for(&self, task: TaskKind) -> f32 {
        match task {
            TaskKind::MultiClass => self.learning_rate,
            TaskKind::MultiLabel => self.multilabel_learning_rate,
        }
    }

    fn sizes(&self, input_dim: usize, outputs: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect()
    }
}

/// Labeled state for supervised pretraining and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    pub state: FeatureVector,
    pub gold: IntentAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 20,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAgent {
    task: TaskKind,
    config: PolicyConfig,
    /// One softmax network, or one single-output sigmoid network per label.
    heads: Vec<Network>,
    optimizers: Vec<OptimizerState>,
    rng: ChaCha8Rng,
    pending: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    task: TaskKind,
    config: PolicyConfig,
    input_dim: usize,
    heads: Vec<String>,
    valid_combos: ValidComboSet,
    rng: ChaCha8Rng,
}

impl PolicyAgent {
    /// Fresh agent with random weights drawn from `init`; `rng` drives
    /// action sampling.
    pub fn new<R: Rng + ?Sized>(
        task: TaskKind,
        input_dim: usize,
        config: PolicyConfig,
        init: &mut R,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        let act = config.activation()?;
        let heads = match task {
            TaskKind::MultiClass => vec![Network::random(
                &config.sizes(input_dim, MULTI_CLASS_ACTIONS.len()),
                act,
                Head::Softmax,
                config.output_gain,
                init,
            )?],
            TaskKind::MultiLabel => (0..N_LABELS)
                .map(|_| {
                    Network::random(
                        &config.sizes(input_dim, 1),
                        act,
                        Head::Sigmoid,
                        config.output_gain,
                        init,
                    )
                })
                .collect::<Result<_>>()?,
        };
        Self::from_heads(task, config, heads, rng)
    }

    /// All-zero weights: uniform softmax, or every bit at probability 0.5.
    pub fn zeros(task: TaskKind, input_dim: usize, config: PolicyConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let act = config.activation()?;
        let heads = match task {
            TaskKind::MultiClass => vec![Network::zeros(
                &config.sizes(input_dim, MULTI_CLASS_ACTIONS.len()),
                act,
                Head::Softmax,
            )?],
            TaskKind::MultiLabel => (0..N_LABELS)
                .map(|_| Network::zeros(&config.sizes(input_dim, 1), act, Head::Sigmoid))
                .collect::<Result<_>>()?,
        };
        Self::from_heads(task, config, heads, rng)
    }

    fn from_heads(task: TaskKind, config: PolicyConfig, heads: Vec<Network>, rng: ChaCha8Rng) -> Result<Self> {
        let (want, head, outputs) = match task {
            TaskKind::MultiClass => (1, Head::Softmax, MULTI_CLASS_ACTIONS.len()),
            TaskKind::MultiLabel => (N_LABELS, Head::Sigmoid, 1),
        };
        if heads.len() != want || heads.iter().any(|h| h.head() != head || h.output_dim() != outputs) {
            return Err(Error::Config(format!("heads do not fit the {} task", task.name())));
        }
        let dim = heads[0].input_dim();
        if heads.iter().any(|h| h.input_dim() != dim) {
            return Err(Error::Config("policy heads disagree on input dimension".into()));
        }
        let optimizers = heads
            .iter()
            .map(|_| OptimizerState::with_momentum(config.learning_rate_for(task), config.momentum))
            .collect::<Result<_>>()?;
        Ok(PolicyAgent {
            task,
            config,
            heads,
            optimizers,
            rng,
            pending: 0,
        })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    /// Replaces the sampling RNG and drops any partially accumulated batch.
    pub fn reseed(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
        self.pending = 0;
        self.heads.iter_mut().for_each(Network::zero_grad);
    }

    pub fn input_dim(&self) -> usize {
        self.heads[0].input_dim()
    }

    pub fn heads(&self) -> &[Network] {
        &self.heads
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    fn check_state(&self, state: &FeatureVector) -> Result<()> {
        if state.dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: state.dim(),
            });
        }
        Ok(())
    }

    fn traces(&self, state: &FeatureVector) -> Result<Vec<Trace>> {
        self.check_state(state)?;
        self.heads.iter().map(|h| h.trace(state.as_slice())).collect()
    }

    /// Action probabilities: the softmax vector, or `P(bit = 1)` per label.
    pub fn probabilities(&self, state: &FeatureVector) -> Result<Vec<f64>> {
        Ok(self.traces(state)?.iter().flat_map(|t| t.probs().to_vec()).collect())
    }

    /// `ln pi(action | state)`; the sum over heads for multi-label.
    pub fn log_prob(&self, state: &FeatureVector, action: &IntentAction) -> Result<f64> {
        let traces = self.traces(state)?;
        self.log_prob_traced(&traces, action)
    }

    fn log_prob_traced(&self, traces: &[Trace], action: &IntentAction) -> Result<f64> {
        self.check_action(action)?;
        match action {
            IntentAction::MultiClass(a) => self.heads[0].log_prob(&traces[0], Target::Class(*a)),
            IntentAction::MultiLabel(bits) => self
                .heads
                .iter()
                .zip(traces)
                .zip(bits)
                .map(|((h, t), b)| h.log_prob(t, Target::Bits(std::slice::from_ref(b))))
                .sum(),
        }
    }

    fn check_action(&self, action: &IntentAction) -> Result<()> {
        if action.task() != self.task {
            return Err(Error::Contract(format!(
                "{} action given to a {} policy",
                action.task().name(),
                self.task.name()
            )));
        }
        if let IntentAction::MultiClass(a) = action {
            IntentAction::multi_class(*a)?;
        }
        Ok(())
    }

    /// Samples an action on-policy with the agent's own RNG.
    pub fn act(&mut self, state: &FeatureVector) -> Result<(IntentAction, f64)> {
        let mut rng = self.rng.clone();
        let out = self.act_with(state, &mut rng);
        self.rng = rng;
        out
    }

    /// Samples an action on-policy from an external RNG.
    pub fn act_with<R: Rng + ?Sized>(&self, state: &FeatureVector, rng: &mut R) -> Result<(IntentAction, f64)> {
        let traces = self.traces(state)?;
        let action = match self.task {
            TaskKind::MultiClass => {
                let probs = traces[0].probs();
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let idx = probs
                    .iter()
                    .position(|p| {
                        acc += p;
                        u < acc
                    })
                    .unwrap_or(probs.len() - 1);
                IntentAction::MultiClass(idx)
            }
            TaskKind::MultiLabel => {
                let mut bits = [false; N_LABELS];
                for (b, t) in bits.iter_mut().zip(&traces) {
                    *b = rng.gen::<f64>() < t.probs()[0];
                }
                IntentAction::MultiLabel(bits)
            }
        };
        let lp = self.log_prob_traced(&traces, &action)?;
        Ok((action, lp))
    }

    /// Deterministic prediction: argmax, or each bit thresholded at 0.5.
    pub fn predict(&self, state: &FeatureVector) -> Result<IntentAction> {
        let traces = self.traces(state)?;
        Ok(match self.task {
            TaskKind::MultiClass => {
                let p = traces[0].probs();
                let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
                IntentAction::MultiClass(best)
            }
            TaskKind::MultiLabel => {
                let mut bits = [false; N_LABELS];
                for (b, t) in bits.iter_mut().zip(&traces) {
                    *b = t.probs()[0] >= 0.5;
                }
                IntentAction::MultiLabel(bits)
            }
        })
    }

    /// One REINFORCE step from an interaction. Absent feedback and zero
    /// reward leave the agent untouched.
    pub fn learn(&mut self, record: &InteractionRecord) -> Result<()> {
        if !record.feedback_present {
            return Ok(());
        }
        self.reinforce(&record.state, &record.action, record.reward)
    }

    /// Accumulates `-reward * grad ln pi(action | state)` and applies an
    /// update once `batch_size` nonzero rewards have been seen.
    pub fn reinforce(&mut self, state: &FeatureVector, action: &IntentAction, reward: f32) -> Result<()> {
        self.check_action(action)?;
        let traces = self.traces(state)?;
        if reward == 0.0 {
            return Ok(());
        }
        match action {
            IntentAction::MultiClass(a) => self.heads[0].reinforce_backward(&traces[0], Target::Class(*a), reward)?,
            IntentAction::MultiLabel(bits) => {
                for ((h, t), b) in self.heads.iter_mut().zip(&traces).zip(bits) {
                    h.reinforce_backward(t, Target::Bits(std::slice::from_ref(b)), reward)?;
                }
            }
        }
        self.pending += 1;
        if self.pending >= self.config.batch_size {
            self.flush()?;
        }
        Ok(())
    }

    /// Applies any accumulated gradient.
    pub fn flush(&mut self) -> Result<()> {
        self.pending = 0;
        for (h, opt) in self.heads.iter_mut().zip(&mut self.optimizers) {
            apply_update(h.params_mut(), opt)?;
        }
        Ok(())
    }

    /// Supervised cross-entropy training on a labeled subset. Returns the
    /// mean training loss of each epoch.
    pub fn pretrain<R: Rng + ?Sized>(
        &mut self,
        subset: &[LabeledState],
        cfg: &PretrainConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if subset.is_empty() {
            return Err(Error::Empty("pretraining subset"));
        }
        for ex in subset {
            self.check_state(&ex.state)?;
            self.check_action(&ex.gold)?;
        }
        let mut opts: Vec<OptimizerState> = self
            .heads
            .iter()
            .map(|_| OptimizerState::sgd(cfg.learning_rate))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..subset.len()).collect();
        let mut losses = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for &i in &order {
                let ex = &subset[i];
                let traces = self.traces(&ex.state)?;
                total -= self.log_prob_traced(&traces, &ex.gold)?;
                match &ex.gold {
                    IntentAction::MultiClass(a) => self.heads[0].supervised_backward(&traces[0], Target::Class(*a))?,
                    IntentAction::MultiLabel(bits) => {
                        for ((h, t), b) in self.heads.iter_mut().zip(&traces).zip(bits) {
                            h.supervised_backward(t, Target::Bits(std::slice::from_ref(b)))?;
                        }
                    }
                }
                for (h, opt) in self.heads.iter_mut().zip(&mut opts) {
                    apply_update(h.params_mut(), opt)?;
                }
            }
            losses.push(total / subset.len() as f64);
        }
        Ok(losses)
    }

    /// Fraction of exact matches between prediction and gold.
    pub fn evaluate(&self, eval: &[LabeledState]) -> Result<f64> {
        if eval.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let mut hits = 0usize;
        for ex in eval {
            if self.predict(&ex.state)? == ex.gold {
                hits += 1;
            }
        }
        Ok(hits as f64 / eval.len() as f64)
    }

    /// Writes one checkpoint per head plus a JSON manifest into `dir`.
    pub fn save(&self, dir: &Path, valid_combos: &ValidComboSet) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let names = self.head_names();
        for (h, name) in self.heads.iter().zip(&names) {
            save_checkpoint(h, &dir.join(format!("{name}.narl")))?;
        }
        let manifest = Manifest {
            task: self.task,
            config: self.config.clone(),
            input_dim: self.input_dim(),
            heads: names,
            valid_combos: valid_combos.clone(),
            rng: self.rng.clone(),
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, ValidComboSet)> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        let heads = m
            .heads
            .iter()
            .map(|n| load_checkpoint(&dir.join(format!("{n}.narl"))))
            .collect::<Result<Vec<_>>>()?;
        let agent = Self::from_heads(m.task, m.config, heads, m.rng)?;
        if agent.input_dim() != m.input_dim {
            return Err(Error::Checkpoint("head input size disagrees with the manifest".into()));
        }
        Ok((agent, m.valid_combos))
    }

    fn head_names(&self) -> Vec<String> {
        match self.task {
            TaskKind::MultiClass => vec!["intent".into()],
            TaskKind::MultiLabel => MULTI_LABEL_ACTIONS.iter().map(|n| format!("label.{n}")).collect(),
        }
    }
}
