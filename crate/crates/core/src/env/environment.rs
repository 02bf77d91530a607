use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_regime, generate_email, generate_pretrain_email, respond, EmailMessage, FeedbackRegime, GeneratorConfig,
};
use crate::emotion::{classify_emotion, reward_of, EmotionLabel, EmotionModel};
use crate::policy::{IntentAction, LabeledState, TaskKind};
use crate::scope::{ScopeModel, ScopedMessage};
use crate::seed::rng_for;
use crate::text::{featurize, FeatureVector, Vocabulary};
use crate::{Error, Result};

/// One served request, the agent's action and the feedback it drew.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub step: u64,
    pub state: FeatureVector,
    pub action: IntentAction,
    pub gold: IntentAction,
    pub feedback_present: bool,
    pub observed: EmotionLabel,
    pub reward: f32,
    pub correct: bool,
}

/// Trained scope and emotion models used to read replies.
#[derive(Debug, Clone)]
pub struct LearnedModels {
    pub scope: ScopeModel,
    pub emotion: EmotionModel,
}

/// Where the reward's emotion label comes from.
#[derive(Debug, Clone)]
pub enum EmotionChannel {
    /// The generator's gold label for the reply; requests are reduced to
    /// their gold-relevant sentences.
    Oracle,
    /// Scope and emotion models applied to both requests and replies.
    Learned(Box<LearnedModels>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Oracle,
    Learned,
}

impl EmotionChannel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            EmotionChannel::Oracle => ChannelKind::Oracle,
            EmotionChannel::Learned(_) => ChannelKind::Learned,
        }
    }
}

/// Simulated users: serves requests and turns the agent's actions into
/// (possibly missing or corrupted) emotional feedback.
#[derive(Debug, Clone)]
pub struct Environment {
    config: GeneratorConfig,
    task: TaskKind,
    regime: FeedbackRegime,
    channel: EmotionChannel,
    vocab: Vocabulary,
    requests: ChaCha8Rng,
    replies: ChaCha8Rng,
    feedback: ChaCha8Rng,
    steps: u64,
    current: Option<EmailMessage>,
}

impl Environment {
    pub fn new(
        config: GeneratorConfig,
        task: TaskKind,
        regime: FeedbackRegime,
        channel: EmotionChannel,
        vocab: Vocabulary,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        regime.validate()?;
        if let EmotionChannel::Learned(m) = &channel {
            if m.scope.vocab_size() != vocab.len() || m.emotion.input_dim() != vocab.len() {
                return Err(Error::Config(
                    "learned models were trained on a different vocabulary".into(),
                ));
            }
        }
        Ok(Environment {
            config,
            task,
            regime,
            channel,
            vocab,
            requests: rng_for(seed, "env.requests"),
            replies: rng_for(seed, "env.replies"),
            feedback: rng_for(seed, "env.feedback"),
            steps: 0,
            current: None,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn state_dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn current(&self) -> Option<&EmailMessage> {
        self.current.as_ref()
    }

    /// Draws a gold intent, writes the request and returns its state.
    pub fn serve(&mut self) -> Result<FeatureVector> {
        let intent = self.config.sample_intent(self.task, &mut self.requests)?;
        let msg = generate_email(&self.config, &mut self.requests, intent)?;
        let state = self.state_of(&msg);
        self.current = Some(msg);
        Ok(state)
    }

    /// Policy state of a request under this environment's channel.
    pub fn state_of(&self, msg: &EmailMessage) -> FeatureVector {
        let sentences = msg.encode(&self.vocab);
        let scoped = match &self.channel {
            EmotionChannel::Oracle => ScopedMessage {
                keep_mask: msg.relevance(),
                sentences,
            },
            EmotionChannel::Learned(m) => m.scope.scope(&sentences),
        };
        featurize(scoped.kept(), &self.vocab)
    }

    /// `n` labeled request states drawn from `rng`; with `pretrain` the
    /// requests use the offline subset's phrasings and prior.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, pretrain: bool) -> Result<Vec<LabeledState>> {
        (0..n)
            .map(|_| {
                let (gold, msg) = if pretrain {
                    let gold = self.config.sample_pretrain_intent(self.task, rng)?;
                    (gold, generate_pretrain_email(&self.config, rng, gold)?)
                } else {
                    let gold = self.config.sample_intent(self.task, rng)?;
                    (gold, generate_email(&self.config, rng, gold)?)
                };
                Ok(LabeledState {
                    state: self.state_of(&msg),
                    gold,
                })
            })
            .collect()
    }

    /// Emotion the channel reads from a reply.
    pub fn perceive(&self, reply: &EmailMessage) -> Result<EmotionLabel> {
        match &self.channel {
            EmotionChannel::Oracle => Ok(reply.emotion),
            EmotionChannel::Learned(m) => {
                let scoped = m.scope.scope(&reply.encode(&self.vocab));
                Ok(classify_emotion(&m.emotion, &scoped, &self.vocab)?.0)
            }
        }
    }

    /// Reacts to `action` on the served request.
    pub fn step(&mut self, state: FeatureVector, action: IntentAction) -> Result<InteractionRecord> {
        let msg = self
            .current
            .take()
            .ok_or_else(|| Error::Protocol("step called before serve".into()))?;
        if action.task() != self.task {
            return Err(Error::Contract(format!("expected a {} action", self.task.name())));
        }
        let reply = respond(&self.config, &mut self.replies, msg.intent, action)?;
        let perceived = self.perceive(&reply)?;
        let (present, observed) = apply_regime(&self.regime, &mut self.feedback, perceived);
        let record = InteractionRecord {
            step: self.steps,
            state,
            action,
            gold: msg.intent,
            feedback_present: present,
            observed,
            reward: if present { reward_of(observed) } else { 0.0 },
            correct: action == msg.intent,
        };
        self.steps += 1;
        Ok(record)
    }
}
