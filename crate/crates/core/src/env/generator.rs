use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Lexicon;
use crate::emotion::{EmotionLabel, Polarity};
use crate::policy::{IntentAction, TaskKind, ValidComboSet, MULTI_CLASS_ACTIONS};
use crate::text::{insertion_positions, segment, Sentence, Vocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Per-slot probability of each of `max_distractors` off-task sentences;
    /// also the probability of a greeting and of a sign-off.
    pub distractor_rate: f64,
    pub max_distractors: usize,
    /// Probability that a message carries a general (not task-directed)
    /// emotion phrase.
    pub general_emotion_rate: f64,
    /// Probability of a directed-positive reply to a correct action.
    pub q_pos: f64,
    /// Probability of a directed-negative reply to a wrong action.
    pub q_neg: f64,
    /// Online intent prior over the multi-class actions or the valid
    /// multi-label combinations; uniform when absent.
    pub intent_prior: Option<Vec<f64>>,
    /// Phrasing families users draw from online.
    pub online_families: Vec<usize>,
    /// Phrasing families visible in the small offline labeled subset.
    pub pretrain_families: Vec<usize>,
    /// Intent prior of the offline labeled subset; uniform when absent.
    pub pretrain_prior: Option<Vec<f64>>,
    pub valid_combos: ValidComboSet,
    /// Alternative lexicon file; the built-in one when absent.
    pub lexicon_file: Option<PathBuf>,
    #[serde(skip)]
    pub lexicon: Lexicon,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            distractor_rate: 0.5,
            max_distractors: 4,
            general_emotion_rate: 0.5,
            q_pos: 0.8,
            q_neg: 0.9,
            intent_prior: None,
            online_families: vec![0, 1],
            pretrain_families: vec![0],
            pretrain_prior: None,
            valid_combos: ValidComboSet::default(),
            lexicon_file: None,
            lexicon: Lexicon::default(),
        }
    }
}

impl GeneratorConfig {
    /// Loads `lexicon_file` (if any) and checks every parameter.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(path) = &self.lexicon_file {
            self.lexicon = Lexicon::load(path)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("distractor_rate", self.distractor_rate),
            ("general_emotion_rate", self.general_emotion_rate),
            ("q_pos", self.q_pos),
            ("q_neg", self.q_neg),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, fams) in [
            ("online_families", &self.online_families),
            ("pretrain_families", &self.pretrain_families),
        ] {
            if fams.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            for a in MULTI_CLASS_ACTIONS.iter().chain(&crate::policy::MULTI_LABEL_ACTIONS) {
                let have = self.lexicon.families(a);
                if let Some(f) = fams.iter().find(|&&f| f >= have) {
                    return Err(Error::Config(format!("{name}: action {a} has no family {f}")));
                }
            }
        }
        for prior in [&self.intent_prior, &self.pretrain_prior].into_iter().flatten() {
            if prior.iter().any(|&w| !(w >= 0.0 && w.is_finite())) || prior.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(
                    "intent prior weights must be nonnegative with a positive sum".into(),
                ));
            }
        }
        Ok(())
    }

    fn prior_for(&self, task: TaskKind, prior: Option<&Vec<f64>>) -> Result<Vec<f64>> {
        let n = match task {
            TaskKind::MultiClass => MULTI_CLASS_ACTIONS.len(),
            TaskKind::MultiLabel => self.valid_combos.len(),
        };
        match prior {
            None => Ok(vec![1.0; n]),
            Some(p) if p.len() == n => Ok(p.clone()),
            Some(p) => Err(Error::Config(format!(
                "intent prior has {} weights, {} expects {n}",
                p.len(),
                task.name()
            ))),
        }
    }

    fn draw_intent<R: Rng + ?Sized>(
        &self,
        task: TaskKind,
        prior: Option<&Vec<f64>>,
        rng: &mut R,
    ) -> Result<IntentAction> {
        let weights = self.prior_for(task, prior)?;
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut idx = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                idx = i;
                break;
            }
            u -= w;
        }
        Ok(match task {
            TaskKind::MultiClass => IntentAction::MultiClass(idx),
            TaskKind::MultiLabel => IntentAction::MultiLabel(self.valid_combos.combos()[idx]),
        })
    }

    /// Draws a gold intent from the online prior.
    pub fn sample_intent<R: Rng + ?Sized>(&self, task: TaskKind, rng: &mut R) -> Result<IntentAction> {
        self.draw_intent(task, self.intent_prior.as_ref(), rng)
    }

    /// Draws a gold intent from the offline labeled-subset prior.
    pub fn sample_pretrain_intent<R: Rng + ?Sized>(&self, task: TaskKind, rng: &mut R) -> Result<IntentAction> {
        self.draw_intent(task, self.pretrain_prior.as_ref(), rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Request,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Register {
    Directed,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub text: String,
    pub span: (usize, usize),
    pub task_relevant: bool,
    pub directed: Option<Polarity>,
    pub general: Option<Polarity>,
}

impl AnnotatedSentence {
    /// Scope label: task content or emotion directed at the task.
    pub fn relevant(&self) -> bool {
        self.task_relevant || self.directed.is_some()
    }
}

/// One emotion phrase placed at a candidate position of the message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    /// Byte offset of the insertion point (right after a split mark).
    pub offset: usize,
    pub register: Register,
    pub polarity: Polarity,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub text: String,
    pub sentences: Vec<AnnotatedSentence>,
    pub intent: IntentAction,
    pub emotion: EmotionLabel,
    pub kind: MessageKind,
    pub injections: Vec<Injection>,
}

impl EmailMessage {
    pub fn encode(&self, vocab: &Vocabulary) -> Vec<Sentence> {
        self.sentences
            .iter()
            .map(|s| Sentence {
                text: s.text.clone(),
                token_ids: vocab.encode(&s.text),
                span: s.span,
            })
            .collect()
    }

    pub fn relevance(&self) -> Vec<bool> {
        self.sentences.iter().map(AnnotatedSentence::relevant).collect()
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone)]
struct Draft {
    text: String,
    task_relevant: bool,
    directed: Option<Polarity>,
    general: Option<Polarity>,
    injected: bool,
}

impl Draft {
    fn plain(text: String, task_relevant: bool) -> Self {
        Draft {
            text,
            task_relevant,
            directed: None,
            general: None,
            injected: false,
        }
    }
}

fn render(drafts: &[Draft]) -> (String, Vec<(usize, usize)>) {
    let mut text = String::new();
    let mut spans = Vec::with_capacity(drafts.len());
    for d in drafts {
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(&d.text);
        spans.push((start, text.len()));
    }
    (text, spans)
}

/// Inserts `phrase` at a randomly chosen split position of the rendered
/// drafts; with `adjacent_to_task` only positions closing a task sentence
/// qualify.
fn inject<R: Rng + ?Sized>(drafts: &mut Vec<Draft>, phrase: Draft, adjacent_to_task: bool, rng: &mut R) -> Result<()> {
    let (text, spans) = render(drafts);
    let candidates: Vec<usize> = insertion_positions(&text)
        .into_iter()
        .filter(|&p| {
            !adjacent_to_task
                || spans
                    .iter()
                    .zip(drafts.iter())
                    .any(|(s, d)| s.1 == p && d.task_relevant)
        })
        .collect();
    let &pos = candidates
        .choose(rng)
        .ok_or_else(|| Error::Contract("no insertion position for emotion phrase".into()))?;
    let idx = spans
        .iter()
        .position(|s| s.1 == pos)
        .ok_or_else(|| Error::Contract("insertion position does not close a sentence".into()))?;
    drafts.insert(idx + 1, phrase);
    Ok(())
}

fn task_drafts<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    kind: MessageKind,
    intent: &IntentAction,
    families: &[usize],
    rng: &mut R,
) -> Result<Vec<Draft>> {
    let lex = &config.lexicon;
    match kind {
        MessageKind::Reply => {
            let t = lex.pick("reply", rng).to_string();
            Ok(vec![Draft::plain(lex.render(&t, None, rng), true)])
        }
        MessageKind::Request => {
            if let IntentAction::MultiLabel(bits) = intent {
                if !config.valid_combos.contains(bits) {
                    return Err(Error::Contract(format!("unknown intent {intent}")));
                }
            }
            intent
                .action_names()
                .into_iter()
                .map(|name| {
                    let family = *families.choose(rng).expect("validated families");
                    let t = lex
                        .action_templates(name, family)
                        .choose(rng)
                        .ok_or_else(|| Error::Contract(format!("no templates for {name} family {family}")))?;
                    Ok(Draft::plain(lex.render(t, None, rng), true))
                })
                .collect()
        }
    }
}

/// Builds one message: task sentences mixed with off-task ones, then an
/// optional general emotion phrase placed at any split position and an
/// optional task-directed emotion phrase placed right after a task sentence.
fn compose<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    kind: MessageKind,
    intent: IntentAction,
    directed: Option<Polarity>,
    families: &[usize],
    rng: &mut R,
) -> Result<EmailMessage> {
    let lex = &config.lexicon;
    let mut middle = task_drafts(config, kind, &intent, families, rng)?;
    for _ in 0..config.max_distractors {
        if rng.gen_bool(config.distractor_rate) {
            let t = lex.pick("distractor", rng).to_string();
            middle.push(Draft::plain(lex.render(&t, None, rng), false));
        }
    }
    middle.shuffle(rng);
    let mut drafts = Vec::with_capacity(middle.len() + 4);
    if rng.gen_bool(config.distractor_rate) {
        let t = lex.pick("greeting", rng).to_string();
        drafts.push(Draft::plain(lex.render(&t, None, rng), false));
    }
    drafts.extend(middle);
    if rng.gen_bool(config.distractor_rate) {
        let t = lex.pick("signoff", rng).to_string();
        drafts.push(Draft::plain(lex.render(&t, None, rng), false));
    }

    if rng.gen_bool(config.general_emotion_rate) {
        let p = if rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        let t = lex.pick("general", rng).to_string();
        let phrase = Draft {
            text: lex.render(&t, Some(p), rng),
            task_relevant: false,
            directed: None,
            general: Some(p),
            injected: true,
        };
        inject(&mut drafts, phrase, false, rng)?;
    }

    if let Some(p) = directed {
        let t = (*lex.directed_templates(p).choose(rng).expect("validated lexicon")).clone();
        let phrase = Draft {
            text: lex.render(&t, Some(p), rng),
            task_relevant: false,
            directed: Some(p),
            general: None,
            injected: true,
        };
        inject(&mut drafts, phrase, true, rng)?;
    }
    let (text, spans) = render(&drafts);
    let mut injections = Vec::new();
    let mut sentences = Vec::with_capacity(drafts.len());
    for (i, (d, span)) in drafts.iter().zip(&spans).enumerate() {
        if d.injected {
            let (register, polarity) = match (d.directed, d.general) {
                (Some(p), _) => (Register::Directed, p),
                (None, Some(p)) => (Register::General, p),
                (None, None) => unreachable!("injected drafts carry emotion"),
            };
            injections.push(Injection {
                offset: spans[i - 1].1,
                register,
                polarity,
                phrase: d.text.clone(),
            });
        }
        sentences.push(AnnotatedSentence {
            text: d.text.clone(),
            span: *span,
            task_relevant: d.task_relevant,
            directed: d.directed,
            general: d.general,
        });
    }
    Ok(EmailMessage {
        text,
        sentences,
        intent,
        emotion: directed.map_or(EmotionLabel::Neutral, EmotionLabel::from),
        kind,
        injections,
    })
}

/// A user request realizing `intent` with online phrasing.
pub fn generate_email<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
    intent: IntentAction,
) -> Result<EmailMessage> {
    compose(config, MessageKind::Request, intent, None, &config.online_families, rng)
}

/// A request phrased like the small offline labeled subset.
pub fn generate_pretrain_email<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
    intent: IntentAction,
) -> Result<EmailMessage> {
    compose(
        config,
        MessageKind::Request,
        intent,
        None,
        &config.pretrain_families,
        rng,
    )
}

/// The user's reaction to the assistant taking `taken` when `gold` was meant.
pub fn respond<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
    gold: IntentAction,
    taken: IntentAction,
) -> Result<EmailMessage> {
    let directed = if gold == taken {
        rng.gen_bool(config.q_pos).then_some(Polarity::Positive)
    } else {
        rng.gen_bool(config.q_neg).then_some(Polarity::Negative)
    };
    compose(config, MessageKind::Reply, gold, directed, &config.online_families, rng)
}

/// Labeled messages for offline scope and emotion training. Emotion labels
/// cycle through positive/negative/neutral before shuffling, so classes are
/// balanced to within one sample.
pub fn build_offline_corpus<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
    n: usize,
) -> Result<Vec<EmailMessage>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let directed = match i % 3 {
            0 => Some(Polarity::Positive),
            1 => Some(Polarity::Negative),
            _ => None,
        };
        let task = if rng.gen_bool(0.5) {
            TaskKind::MultiClass
        } else {
            TaskKind::MultiLabel
        };
        let intent = config.sample_intent(task, rng)?;
        let kind = if rng.gen_bool(0.5) {
            MessageKind::Request
        } else {
            MessageKind::Reply
        };
        out.push(compose(config, kind, intent, directed, &config.online_families, rng)?);
    }
    out.shuffle(rng);
    Ok(out)
}

/// Checks a message against the construction rules; returns violations.
pub fn audit(msg: &EmailMessage) -> Vec<String> {
    let mut v = Vec::new();
    let positions = insertion_positions(&msg.text);
    for inj in &msg.injections {
        if !positions.contains(&inj.offset) {
            v.push(format!("injection at {} is not a split position", inj.offset));
        }
        let tail = msg.text.get(inj.offset..).unwrap_or("");
        if !tail.trim_start().starts_with(&inj.phrase) {
            v.push(format!("phrase {:?} not found at offset {}", inj.phrase, inj.offset));
        }
        if inj.register == Register::Directed {
            let prev = msg.sentences.iter().find(|s| s.span.1 == inj.offset);
            if !prev.is_some_and(|s| s.task_relevant) {
                v.push(format!(
                    "directed phrase {:?} not adjacent to a task sentence",
                    inj.phrase
                ));
            }
        }
    }
    let directed: Vec<Polarity> = msg.sentences.iter().filter_map(|s| s.directed).collect();
    let expected = directed
        .first()
        .copied()
        .map_or(EmotionLabel::Neutral, EmotionLabel::from);
    if directed.iter().any(|&p| EmotionLabel::from(p) != expected) || msg.emotion != expected {
        v.push(format!("emotion label {} disagrees with directed phrases", msg.emotion));
    }
    let segs = segment(&msg.text);
    if segs.len() != msg.sentences.len()
        || segs
            .iter()
            .zip(&msg.sentences)
            .any(|(g, s)| g.text != s.text || g.span != s.span)
    {
        v.push("sentence annotations do not match segmentation".into());
    }
    v
}
