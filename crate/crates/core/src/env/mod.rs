//! Synthetic email users: message generation with emotion injection, the
//! user's reaction to an action, and the feedback regimes.

mod environment;
mod generator;
mod lexicon;
mod regime;

pub use environment::{ChannelKind, EmotionChannel, Environment, InteractionRecord, LearnedModels};
pub use generator::{
    audit, build_offline_corpus, generate_email, generate_pretrain_email, respond, AnnotatedSentence, EmailMessage,
    GeneratorConfig, Injection, MessageKind, Register,
};
pub use lexicon::{is_single_segment, Lexicon};
pub use regime::{apply_regime, FeedbackRegime, DEFAULT_FEEDBACK_RATE, DEFAULT_WRONG_FRACTION};
