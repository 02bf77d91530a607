use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emotion::EmotionLabel;
use crate::{Error, Result};

/// Share of requests that leave feedback in the partial regimes.
pub const DEFAULT_FEEDBACK_RATE: f64 = 0.15;
/// Share of present feedback that is wrong in the noisy regime.
pub const DEFAULT_WRONG_FRACTION: f64 = 1.0 / 3.0;

/// How much implicit feedback reaches the learner, and how reliable it is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackRegime {
    Full,
    Partial { p: f64 },
    PartialNoisy { p: f64, wrong_frac: f64 },
}

impl FeedbackRegime {
    pub fn partial() -> Self {
        FeedbackRegime::Partial {
            p: DEFAULT_FEEDBACK_RATE,
        }
    }

    pub fn partial_noisy() -> Self {
        FeedbackRegime::PartialNoisy {
            p: DEFAULT_FEEDBACK_RATE,
            wrong_frac: DEFAULT_WRONG_FRACTION,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeedbackRegime::Full => "full",
            FeedbackRegime::Partial { .. } => "partial",
            FeedbackRegime::PartialNoisy { .. } => "partial_noisy",
        }
    }

    /// Parses `full`, `partial` or `partial_noisy` with the default rates.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(FeedbackRegime::Full),
            "partial" => Ok(Self::partial()),
            "partial_noisy" | "partial-noisy" => Ok(Self::partial_noisy()),
            _ => Err(Error::Config(format!("unknown feedback regime {name:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (p, f) = match *self {
            FeedbackRegime::Full => return Ok(()),
            FeedbackRegime::Partial { p } => (p, 0.0),
            FeedbackRegime::PartialNoisy { p, wrong_frac } => (p, wrong_frac),
        };
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Config(format!("feedback rate must be in (0, 1], got {p}")));
        }
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Config(format!("wrong fraction must be in [0, 1), got {f}")));
        }
        Ok(())
    }
}

/// Decides whether the user's emotion reaches the learner and what label it
/// arrives with. Corruption swaps positive and negative; a corrupted
/// neutral becomes positive or negative with equal odds.
pub fn apply_regime<R: Rng + ?Sized>(
    regime: &FeedbackRegime,
    rng: &mut R,
    label: EmotionLabel,
) -> (bool, EmotionLabel) {
    match *regime {
        FeedbackRegime::Full => (true, label),
        FeedbackRegime::Partial { p } => (rng.gen_bool(p), label),
        FeedbackRegime::PartialNoisy { p, wrong_frac } => {
            if !rng.gen_bool(p) {
                return (false, label);
            }
            if !rng.gen_bool(wrong_frac) {
                return (true, label);
            }
            let corrupted = match label {
                EmotionLabel::Positive => EmotionLabel::Negative,
                EmotionLabel::Negative => EmotionLabel::Positive,
                EmotionLabel::Neutral => {
                    if rng.gen_bool(0.5) {
                        EmotionLabel::Positive
                    } else {
                        EmotionLabel::Negative
                    }
                }
            };
            (true, corrupted)
        }
    }
}
