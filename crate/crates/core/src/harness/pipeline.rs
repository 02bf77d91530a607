//! The offline stages and the online loop, in memory. The run-directory
//! layer in `rundir` persists what these produce.

use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{Config, ExperimentConfig, InitKind};
use super::curve::{CurveRow, CurveWriter, LearningCurve, RollingSuccess};
use crate::emotion::{train_emotion, EmotionExample, EmotionMetrics, EmotionModel, EmotionScores};
use crate::env::{
    build_offline_corpus, ChannelKind, EmailMessage, EmotionChannel, Environment, FeedbackRegime, GeneratorConfig,
    LearnedModels,
};
use crate::exec::{self, Execution};
use crate::policy::{LabeledState, PolicyAgent, PretrainConfig, TaskKind};
use crate::scope::{train_scope, ScopeExample, ScopeMetrics, ScopeModel, ScopedMessage};
use crate::seed::rng_for;
use crate::text::{featurize, Vocabulary};
use crate::{Error, Result};

/// Labeled offline messages and the vocabulary built from them.
#[derive(Debug, Clone)]
pub struct OfflineData {
    pub corpus: Vec<EmailMessage>,
    pub vocab: Vocabulary,
}

pub fn gen_data(cfg: &Config) -> Result<OfflineData> {
    let mut rng = rng_for(cfg.seed, "offline");
    let corpus = build_offline_corpus(&cfg.generator, &mut rng, cfg.data.offline_size)?;
    let vocab = Vocabulary::build(corpus.iter().map(|m| m.text.as_str()), cfg.data.vocab_size)?;
    Ok(OfflineData { corpus, vocab })
}

pub fn scope_examples(corpus: &[EmailMessage], vocab: &Vocabulary) -> Vec<ScopeExample> {
    corpus
        .iter()
        .map(|m| ScopeExample {
            sentences: m.encode(vocab),
            labels: m.relevance(),
        })
        .collect()
}

pub fn fit_scope(cfg: &Config, data: &OfflineData) -> Result<(ScopeModel, ScopeMetrics)> {
    let mut rng = rng_for(cfg.seed, "scope");
    let mut model = ScopeModel::new(data.vocab.len(), cfg.scope.dim, cfg.scope.window, &mut rng)?;
    let metrics = train_scope(
        &mut model,
        &scope_examples(&data.corpus, &data.vocab),
        &cfg.scope.train_config(),
        &mut rng,
    )?;
    info!("scope filter held-out F1 {:.4}", metrics.heldout.f1);
    Ok((model, metrics))
}

/// How a message is reduced before its emotion is read.
#[derive(Debug, Clone, Copy)]
pub enum View<'a> {
    Unscoped,
    Scoped(&'a ScopeModel),
}

pub fn emotion_examples(
    corpus: &[EmailMessage],
    vocab: &Vocabulary,
    view: View<'_>,
    mode: Execution,
) -> Vec<EmotionExample> {
    exec::map_slice(mode, corpus, |m| {
        let sentences = m.encode(vocab);
        let scoped = match view {
            View::Unscoped => ScopedMessage::keep_all(sentences),
            View::Scoped(model) => model.scope(&sentences),
        };
        EmotionExample {
            features: featurize(scoped.kept(), vocab),
            label: m.emotion,
        }
    })
}

/// Emotion metrics with and without scoping.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionReport {
    /// The scoped model's train and held-out scores.
    pub scoped: EmotionMetrics,
    pub unscoped: EmotionMetrics,
    /// Scores on the distractor-heavy evaluation set.
    pub distractor_scoped: EmotionScores,
    pub distractor_unscoped: EmotionScores,
}

impl EmotionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,accuracy,macro_f1\n");
        for (split, s) in [
            ("train", self.scoped.train),
            ("heldout", self.scoped.heldout),
            ("heldout_unscoped", self.unscoped.heldout),
            ("distractor_scoped", self.distractor_scoped),
            ("distractor_unscoped", self.distractor_unscoped),
        ] {
            out.push_str(&format!("{split},{:.6},{:.6}\n", s.accuracy, s.macro_f1));
        }
        out
    }
}

/// Generator settings for the distractor-heavy emotion evaluation: every
/// message carries general emotion and most carry off-task sentences.
pub fn distractor_heavy(generator: &GeneratorConfig) -> GeneratorConfig {
    GeneratorConfig {
        distractor_rate: 0.9,
        general_emotion_rate: 1.0,
        ..generator.clone()
    }
}

/// Trains the emotion model on scoped text, plus an unscoped twin for the
/// paired comparison.
pub fn fit_emotion(
    cfg: &Config,
    data: &OfflineData,
    scope: &ScopeModel,
    mode: Execution,
) -> Result<(EmotionModel, EmotionReport)> {
    let heavy = distractor_heavy(&cfg.generator);
    let mut eval_rng = rng_for(cfg.seed, "emotion.distractor_eval");
    let eval_msgs = build_offline_corpus(&heavy, &mut eval_rng, cfg.data.distractor_eval_size.max(3))?;

    let fit = |view: View<'_>, stream: &str| -> Result<(EmotionModel, EmotionMetrics, EmotionScores)> {
        let mut rng = rng_for(cfg.seed, stream);
        let mut model = EmotionModel::new(data.vocab.len(), &cfg.emotion.hidden, &mut rng)?;
        let train = emotion_examples(&data.corpus, &data.vocab, view, mode);
        let metrics = train_emotion(&mut model, &train, &cfg.emotion, &mut rng)?;
        let heavy = model.score(&emotion_examples(&eval_msgs, &data.vocab, view, mode))?;
        Ok((model, metrics, heavy))
    };
    let (model, scoped, distractor_scoped) = fit(View::Scoped(scope), "emotion")?;
    let (_, unscoped, distractor_unscoped) = fit(View::Unscoped, "emotion")?;
    info!(
        "emotion accuracy held-out {:.4}; distractor-heavy scoped {:.4} vs unscoped {:.4}",
        scoped.heldout.accuracy, distractor_scoped.accuracy, distractor_unscoped.accuracy
    );
    Ok((
        model,
        EmotionReport {
            scoped,
            unscoped,
            distractor_scoped,
            distractor_unscoped,
        },
    ))
}

/// Everything an online run reads but never writes.
#[derive(Debug, Clone)]
pub struct Resources {
    pub generator: GeneratorConfig,
    pub vocab: Vocabulary,
    pub learned: Option<LearnedModels>,
    pub pretrained: BTreeMap<(TaskKind, ChannelKind), PolicyAgent>,
    pub eval: BTreeMap<(TaskKind, ChannelKind), Vec<LabeledState>>,
}

impl Resources {
    pub fn new(cfg: &Config, vocab: Vocabulary, learned: Option<LearnedModels>) -> Self {
        Resources {
            generator: cfg.generator.clone(),
            vocab,
            learned,
            pretrained: BTreeMap::new(),
            eval: BTreeMap::new(),
        }
    }

    pub fn channel(&self, kind: ChannelKind) -> Result<EmotionChannel> {
        match kind {
            ChannelKind::Oracle => Ok(EmotionChannel::Oracle),
            ChannelKind::Learned => self
                .learned
                .clone()
                .map(|m| EmotionChannel::Learned(Box::new(m)))
                .ok_or_else(|| Error::MissingArtifact {
                    path: "checkpoints/emotion.narl".into(),
                    stage: "train-emotion",
                }),
        }
    }

    fn environment(
        &self,
        task: TaskKind,
        regime: FeedbackRegime,
        channel: ChannelKind,
        seed: u64,
    ) -> Result<Environment> {
        Environment::new(
            self.generator.clone(),
            task,
            regime,
            self.channel(channel)?,
            self.vocab.clone(),
            seed,
        )
    }

    /// Builds the shared evaluation set of `task` under `channel`.
    pub fn ensure_eval(&mut self, cfg: &Config, task: TaskKind, channel: ChannelKind) -> Result<&[LabeledState]> {
        if !self.eval.contains_key(&(task, channel)) {
            let env = self.environment(task, FeedbackRegime::Full, channel, cfg.seed)?;
            let mut rng = rng_for(cfg.seed, &format!("eval.{}", task.name()));
            let set = env.sample_labeled(&mut rng, cfg.data.eval_size, false)?;
            self.eval.insert((task, channel), set);
        }
        Ok(&self.eval[&(task, channel)])
    }

    /// Pretrains (once) the agent used for `init = pretrained` runs.
    pub fn ensure_pretrained(&mut self, cfg: &Config, task: TaskKind, channel: ChannelKind) -> Result<PretrainReport> {
        self.ensure_eval(cfg, task, channel)?;
        let (agent, report) = pretrain_intent(cfg, self, task, channel)?;
        self.pretrained.insert((task, channel), agent);
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub task: TaskKind,
    pub subset_size: usize,
    pub epochs: usize,
    pub epoch_loss: Vec<f64>,
    /// Argmax accuracy on the online distribution.
    pub baseline_accuracy: f64,
}

/// Supervised training on a small subset phrased like the offline labelers'
/// data; the returned accuracy is measured on the online distribution.
pub fn pretrain_intent(
    cfg: &Config,
    res: &Resources,
    task: TaskKind,
    channel: ChannelKind,
) -> Result<(PolicyAgent, PretrainReport)> {
    let env = res.environment(task, FeedbackRegime::Full, channel, cfg.seed)?;
    let mut rng = rng_for(cfg.seed, &format!("pretrain.subset.{}", task.name()));
    let subset = env.sample_labeled(&mut rng, cfg.pretrain.subset_size, true)?;
    let mut agent = new_agent(cfg.seed, task, env.state_dim(), &cfg.policy)?;
    let pcfg = PretrainConfig {
        epochs: cfg.pretrain.epochs,
        learning_rate: cfg.pretrain.learning_rate,
    };
    let epoch_loss = agent.pretrain(&subset, &pcfg, &mut rng_for(cfg.seed, "pretrain.order"))?;
    let eval = res
        .eval
        .get(&(task, channel))
        .ok_or_else(|| Error::Contract("evaluation set not prepared".into()))?;
    let baseline_accuracy = agent.evaluate(eval)?;
    info!("pretrained {} baseline accuracy {:.4}", task.name(), baseline_accuracy);
    Ok((
        agent,
        PretrainReport {
            task,
            subset_size: subset.len(),
            epochs: pcfg.epochs,
            epoch_loss,
            baseline_accuracy,
        },
    ))
}

fn new_agent(seed: u64, task: TaskKind, dim: usize, policy: &crate::policy::PolicyConfig) -> Result<PolicyAgent> {
    let mut init = rng_for(seed, &format!("policy.init.{}", task.name()));
    PolicyAgent::new(task, dim, policy.clone(), &mut init, rng_for(seed, "policy.sample"))
}

/// Tallies over the records of one online run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub interactions: u64,
    pub correct: u64,
    pub feedback: u64,
    /// Present feedback whose reward sign matches the action's correctness
    /// (+1 for correct, -1 for wrong).
    pub reward_agrees: u64,
    pub nonzero_rewards: u64,
}

impl RunStats {
    pub fn reward_agreement(&self) -> f64 {
        if self.feedback == 0 {
            0.0
        } else {
            self.reward_agrees as f64 / self.feedback as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub curve: LearningCurve,
    pub agent: PolicyAgent,
    pub stats: RunStats,
}

/// serve -> act -> step -> learn, `exp.interactions` times, recording a
/// curve row every `eval_every` interactions and after the last one.
pub fn run_online(exp: &ExperimentConfig, res: &Resources, mut sink: Option<&mut CurveWriter>) -> Result<OnlineRun> {
    exp.validate()?;
    let mut env = res.environment(exp.task, exp.regime, exp.channel, exp.seed)?;
    let mut agent = match exp.init {
        InitKind::Scratch => new_agent(exp.seed, exp.task, env.state_dim(), &exp.policy)?,
        InitKind::Pretrained => {
            let mut a =
                res.pretrained
                    .get(&(exp.task, exp.channel))
                    .cloned()
                    .ok_or_else(|| Error::MissingArtifact {
                        path: format!("checkpoints/pretrained-{}", exp.task.name()).into(),
                        stage: "pretrain-intent",
                    })?;
            a.reseed(rng_for(exp.seed, "policy.sample"));
            a
        }
    };
    let eval = res
        .eval
        .get(&(exp.task, exp.channel))
        .ok_or_else(|| Error::Contract(format!("no evaluation set for {}", exp.task.name())))?;
    let mut rolling = RollingSuccess::new(exp.window as usize);
    let mut curve = LearningCurve::default();
    let mut stats = RunStats::default();
    for step in 1..=exp.interactions {
        let state = env.serve()?;
        let (action, _) = agent.act(&state)?;
        let record = env.step(state, action)?;
        agent.learn(&record)?;
        rolling.push(record.correct);
        stats.interactions += 1;
        stats.correct += u64::from(record.correct);
        if record.feedback_present {
            stats.feedback += 1;
            let agrees = (record.reward > 0.0 && record.correct) || (record.reward < 0.0 && !record.correct);
            stats.reward_agrees += u64::from(agrees);
        }
        stats.nonzero_rewards += u64::from(record.reward != 0.0);
        if step % exp.eval_every == 0 || step == exp.interactions {
            let row = CurveRow {
                step,
                rolling_success: rolling.rate(),
                eval_accuracy: agent.evaluate(eval)?,
            };
            curve.push(row)?;
            if let Some(w) = sink.as_deref_mut() {
                w.append(&row)?;
            }
        }
    }
    agent.flush()?;
    Ok(OnlineRun { curve, agent, stats })
}

/// Runs independent cells, in parallel when `mode` allows. Results keep
/// the order of `cells`.
pub fn run_grid(
    cells: &[ExperimentConfig],
    res: &Resources,
    mode: Execution,
    curve_dir: Option<&std::path::Path>,
) -> Vec<Result<OnlineRun>> {
    exec::map_slice(mode, cells, |exp| {
        let mut writer = match curve_dir {
            Some(dir) => Some(CurveWriter::create(&dir.join(format!("{}.csv", exp.name())))?),
            None => None,
        };
        run_online(exp, res, writer.as_mut())
    })
}
