use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emotion::EmotionTrainConfig;
use crate::env::{ChannelKind, FeedbackRegime, GeneratorConfig, DEFAULT_FEEDBACK_RATE, DEFAULT_WRONG_FRACTION};
use crate::policy::{PolicyConfig, TaskKind};
use crate::scope::ScopeTrainConfig;
use crate::seed::env_seed;
use crate::{Error, Result};

/// Offline corpus and evaluation-set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub offline_size: usize,
    pub vocab_size: usize,
    /// Labeled online-distribution requests scored at every curve row.
    pub eval_size: usize,
    /// Messages in the distractor-heavy emotion evaluation.
    pub distractor_eval_size: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            offline_size: 6000,
            vocab_size: 2048,
            eval_size: 600,
            distractor_eval_size: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScopeSection {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub holdout_fraction: f64,
}

impl Default for ScopeSection {
    fn default() -> Self {
        let t = ScopeTrainConfig::default();
        ScopeSection {
            dim: 32,
            window: 1,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            holdout_fraction: t.holdout_fraction,
        }
    }
}

impl ScopeSection {
    pub fn train_config(&self) -> ScopeTrainConfig {
        ScopeTrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            holdout_fraction: self.holdout_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    /// Size of the small, skewed labeled subset.
    pub subset_size: usize,
    pub epochs: usize,
    pub learning_rate: f32,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            subset_size: 30,
            epochs: 20,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Scratch,
    Pretrained,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Scratch => "scratch",
            InitKind::Pretrained => "pretrained",
        }
    }
}

/// Settings of a single online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineSection {
    pub task: TaskKind,
    pub init: InitKind,
    /// `full`, `partial` or `partial_noisy`.
    pub regime: String,
    pub feedback_rate: f64,
    pub wrong_fraction: f64,
    pub channel: ChannelKind,
    pub interactions: u64,
    pub eval_every: u64,
    pub window: u64,
    pub seeds: Vec<u64>,
}

impl Default for OnlineSection {
    fn default() -> Self {
        OnlineSection {
            task: TaskKind::MultiClass,
            init: InitKind::Scratch,
            regime: "full".into(),
            feedback_rate: DEFAULT_FEEDBACK_RATE,
            wrong_fraction: DEFAULT_WRONG_FRACTION,
            channel: ChannelKind::Oracle,
            interactions: 20_000,
            eval_every: 250,
            window: 500,
            seeds: vec![1, 2, 3],
        }
    }
}

impl OnlineSection {
    pub fn regime(&self) -> Result<FeedbackRegime> {
        regime_named(&self.regime, self.feedback_rate, self.wrong_fraction)
    }
}

pub fn regime_named(name: &str, p: f64, wrong_frac: f64) -> Result<FeedbackRegime> {
    let r = match FeedbackRegime::from_name(name)? {
        FeedbackRegime::Full => FeedbackRegime::Full,
        FeedbackRegime::Partial { .. } => FeedbackRegime::Partial { p },
        FeedbackRegime::PartialNoisy { .. } => FeedbackRegime::PartialNoisy { p, wrong_frac },
    };
    r.validate()?;
    Ok(r)
}

/// The task x init x regime grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub multiclass_interactions: u64,
    pub multilabel_interactions: u64,
    pub regimes: Vec<String>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            multiclass_interactions: 20_000,
            multilabel_interactions: 30_000,
            regimes: vec!["full".into(), "partial".into(), "partial_noisy".into()],
        }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub data: DataSection,
    pub scope: ScopeSection,
    pub emotion: EmotionTrainConfig,
    pub policy: PolicyConfig,
    pub pretrain: PretrainSection,
    pub online: OnlineSection,
    pub grid: GridSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 7,
            generator: GeneratorConfig::default(),
            data: DataSection::default(),
            scope: ScopeSection::default(),
            emotion: EmotionTrainConfig::default(),
            policy: PolicyConfig::default(),
            pretrain: PretrainSection::default(),
            online: OnlineSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve()
    }

    /// Reads `path`, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => Config::default().resolve(),
        }
    }

    /// Applies seed overrides: `NARLE_SEED` first, then an explicit value.
    pub fn with_seed_override(mut self, explicit: Option<u64>) -> Self {
        if let Some(s) = explicit.or_else(env_seed) {
            self.seed = s;
        }
        self
    }

    fn resolve(mut self) -> Result<Self> {
        self.generator = self.generator.resolve()?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.policy.validate()?;
        self.online.regime()?;
        for r in &self.grid.regimes {
            regime_named(r, self.online.feedback_rate, self.online.wrong_fraction)?;
        }
        let o = &self.online;
        if o.eval_every == 0 || o.window == 0 {
            return Err(Error::Config("eval_every and window must be at least 1".into()));
        }
        if o.seeds.is_empty() {
            return Err(Error::Config("online.seeds is empty".into()));
        }
        if self.data.offline_size < 10 || self.data.eval_size == 0 || self.data.vocab_size < 2 {
            return Err(Error::Config("data sizes are too small".into()));
        }
        if self.scope.dim == 0 {
            return Err(Error::Config("scope.dim must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// One cell of an online experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub init: InitKind,
    pub regime: FeedbackRegime,
    pub channel: ChannelKind,
    pub interactions: u64,
    pub eval_every: u64,
    pub window: u64,
    pub seed: u64,
    pub policy: PolicyConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 || self.window == 0 {
            return Err(Error::Config("eval_every and window must be at least 1".into()));
        }
        if self.interactions > 0 && (self.interactions < self.eval_every || self.window > self.interactions) {
            return Err(Error::Config(format!(
                "need interactions >= eval_every >= 1 and window <= interactions (got {}, {}, {})",
                self.interactions, self.eval_every, self.window
            )));
        }
        self.regime.validate()?;
        self.policy.validate()
    }

    /// File-name stem identifying the cell.
    pub fn name(&self) -> String {
        let channel = match self.channel {
            ChannelKind::Oracle => "oracle",
            ChannelKind::Learned => "learned",
        };
        format!(
            "{}-{}-{}-{}-s{}",
            self.task.name(),
            self.init.name(),
            self.regime.name(),
            channel,
            self.seed
        )
    }

    /// The `[online]` run of `cfg` for one seed.
    pub fn from_online(cfg: &Config, seed: u64) -> Result<Self> {
        let o = &cfg.online;
        Ok(ExperimentConfig {
            task: o.task,
            init: o.init,
            regime: o.regime()?,
            channel: o.channel,
            interactions: o.interactions,
            eval_every: o.eval_every,
            window: o.window,
            seed,
            policy: cfg.policy.clone(),
        })
    }

    /// Every (task, init, regime, seed) cell of the grid.
    pub fn grid(cfg: &Config) -> Result<Vec<Self>> {
        let mut cells = Vec::new();
        for task in [TaskKind::MultiClass, TaskKind::MultiLabel] {
            for init in [InitKind::Scratch, InitKind::Pretrained] {
                for r in &cfg.grid.regimes {
                    for &seed in &cfg.online.seeds {
                        cells.push(ExperimentConfig {
                            task,
                            init,
                            regime: regime_named(r, cfg.online.feedback_rate, cfg.online.wrong_fraction)?,
                            channel: cfg.online.channel,
                            interactions: match task {
                                TaskKind::MultiClass => cfg.grid.multiclass_interactions,
                                TaskKind::MultiLabel => cfg.grid.multilabel_interactions,
                            },
                            eval_every: cfg.online.eval_every,
                            window: cfg.online.window,
                            seed,
                            policy: cfg.policy.clone(),
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}
