//! On-disk layout of a run and the CLI stages that fill it.
//!
//! ```text
//! <run>/config.toml            resolved configuration snapshot
//! <run>/manifest.json          config hash, version, per-stage records
//! <run>/data/offline.jsonl     labeled offline corpus, one message per line
//! <run>/data/vocab.tsv
//! <run>/metrics/*.csv|json     stage metrics
//! <run>/checkpoints/           scope, emotion, pretrained and final agents
//! <run>/curves/<cell>.csv      learning curves
//! <run>/report.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Config, ExperimentConfig, InitKind};
use super::curve::{CurveWriter, LearningCurve};
use super::pipeline::{self, OfflineData, Resources, RunStats};
use super::report::{report_csv, summarize, ReportRow};
use crate::emotion::EmotionModel;
use crate::env::{ChannelKind, EmailMessage, LearnedModels};
use crate::exec::Execution;
use crate::policy::{PolicyAgent, TaskKind};
use crate::scope::ScopeModel;
use crate::text::Vocabulary;
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
    /// Every online cell run in this directory, by name.
    pub cells: BTreeMap<String, ExperimentConfig>,
}

pub struct RunDir {
    root: PathBuf,
    config: Config,
    manifest: Manifest,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, stage })
    }
}

impl RunDir {
    /// Opens (creating if needed) `root`, snapshots `config` and refreshes
    /// the manifest header.
    pub fn open(root: &Path, config: Config) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let manifest_path = root.join(MANIFEST);
        let mut manifest: Manifest = if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
            serde_json::from_str(&text)?
        } else {
            Manifest::default()
        };
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.config_sha256 = config.hash()?;
        manifest.seed = config.seed;
        write(&root.join("config.toml"), config.to_toml()?)?;
        let dir = RunDir {
            root: root.to_path_buf(),
            config,
            manifest,
        };
        dir.save_manifest()?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn save_manifest(&self) -> Result<()> {
        write(
            &self.root.join(MANIFEST),
            serde_json::to_string_pretty(&self.manifest)? + "\n",
        )
    }

    fn record(&mut self, stage: &str, outputs: &[&Path], metrics: &[(&str, f64)]) -> Result<()> {
        let rel = |p: &Path| p.strip_prefix(&self.root).unwrap_or(p).display().to_string();
        let rec = StageRecord {
            config_sha256: self.manifest.config_sha256.clone(),
            seed: self.config.seed,
            outputs: outputs.iter().map(|p| rel(p)).collect(),
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        self.manifest.stages.insert(stage.to_string(), rec);
        self.save_manifest()
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.root.join("data/offline.jsonl")
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.root.join("data/vocab.tsv")
    }

    pub fn scope_path(&self) -> PathBuf {
        self.root.join("checkpoints/scope.narl")
    }

    pub fn emotion_path(&self) -> PathBuf {
        self.root.join("checkpoints/emotion.narl")
    }

    pub fn pretrained_dir(&self, task: TaskKind, channel: ChannelKind) -> PathBuf {
        let channel = match channel {
            ChannelKind::Oracle => "oracle",
            ChannelKind::Learned => "learned",
        };
        self.root
            .join(format!("checkpoints/pretrained-{}-{channel}", task.name()))
    }

    pub fn curve_dir(&self) -> PathBuf {
        self.root.join("curves")
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    /// Writes the offline corpus and vocabulary.
    pub fn gen_data(&mut self) -> Result<OfflineData> {
        let data = pipeline::gen_data(&self.config)?;
        let mut lines = String::new();
        for m in &data.corpus {
            lines.push_str(&m.to_json_line()?);
            lines.push('\n');
        }
        let (corpus, vocab) = (self.corpus_path(), self.vocab_path());
        write(&corpus, lines)?;
        data.vocab.save(&vocab)?;
        self.record(
            "gen-data",
            &[&corpus, &vocab],
            &[
                ("records", data.corpus.len() as f64),
                ("vocab_size", data.vocab.len() as f64),
            ],
        )?;
        Ok(data)
    }

    pub fn load_vocab(&self) -> Result<Vocabulary> {
        Vocabulary::load(&require(self.vocab_path(), "gen-data")?)
    }

    pub fn load_offline(&self) -> Result<OfflineData> {
        let path = require(self.corpus_path(), "gen-data")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let corpus = text
            .lines()
            .map(serde_json::from_str::<EmailMessage>)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(OfflineData {
            corpus,
            vocab: self.load_vocab()?,
        })
    }

    pub fn train_scope(&mut self) -> Result<ScopeModel> {
        let data = self.load_offline()?;
        let (model, m) = pipeline::fit_scope(&self.config, &data)?;
        let ckpt = self.scope_path();
        model.save(&ckpt)?;
        let metrics = self.root.join("metrics/scope.csv");
        let mut csv = String::from("epoch,train_loss\n");
        for (i, l) in m.train_loss.iter().enumerate() {
            csv.push_str(&format!("{i},{l:.6}\n"));
        }
        write(&metrics, csv)?;
        self.record(
            "train-scope",
            &[&ckpt, &metrics],
            &[
                ("heldout_f1", m.heldout.f1),
                ("heldout_precision", m.heldout.precision),
                ("heldout_recall", m.heldout.recall),
                ("heldout_accuracy", m.heldout.accuracy),
            ],
        )?;
        Ok(model)
    }

    pub fn load_scope(&self) -> Result<ScopeModel> {
        ScopeModel::load(&require(self.scope_path(), "train-scope")?)
    }

    pub fn train_emotion(&mut self, mode: Execution) -> Result<EmotionModel> {
        let data = self.load_offline()?;
        let scope = self.load_scope()?;
        let (model, report) = pipeline::fit_emotion(&self.config, &data, &scope, mode)?;
        let ckpt = self.emotion_path();
        model.save(&ckpt)?;
        let metrics = self.root.join("metrics/emotion.csv");
        write(&metrics, report.to_csv())?;
        self.record(
            "train-emotion",
            &[&ckpt, &metrics],
            &[
                ("heldout_accuracy", report.scoped.heldout.accuracy),
                ("heldout_macro_f1", report.scoped.heldout.macro_f1),
                ("distractor_scoped_accuracy", report.distractor_scoped.accuracy),
                ("distractor_unscoped_accuracy", report.distractor_unscoped.accuracy),
            ],
        )?;
        Ok(model)
    }

    pub fn load_learned(&self) -> Result<LearnedModels> {
        Ok(LearnedModels {
            scope: self.load_scope()?,
            emotion: EmotionModel::load(&require(self.emotion_path(), "train-emotion")?)?,
        })
    }

    /// Resources for online runs over `channel`; learned models are loaded
    /// only when needed.
    pub fn resources(&self, channel: ChannelKind) -> Result<Resources> {
        let vocab = self.load_vocab()?;
        let learned = match channel {
            ChannelKind::Oracle => None,
            ChannelKind::Learned => Some(self.load_learned()?),
        };
        Ok(Resources::new(&self.config, vocab, learned))
    }

    pub fn pretrain_intent(&mut self, task: TaskKind) -> Result<pipeline::PretrainReport> {
        let channel = self.config.online.channel;
        let mut res = self.resources(channel)?;
        let report = res.ensure_pretrained(&self.config, task, channel)?;
        let dir = self.pretrained_dir(task, channel);
        res.pretrained[&(task, channel)].save(&dir, &self.config.generator.valid_combos)?;
        let metrics = self.root.join(format!("metrics/pretrain-{}.json", task.name()));
        write(&metrics, serde_json::to_string_pretty(&report)? + "\n")?;
        self.record(
            &format!("pretrain-intent.{}", task.name()),
            &[&dir, &metrics],
            &[("baseline_accuracy", report.baseline_accuracy)],
        )?;
        Ok(report)
    }

    fn attach_pretrained(&self, res: &mut Resources, cells: &[ExperimentConfig]) -> Result<()> {
        for exp in cells.iter().filter(|e| e.init == InitKind::Pretrained) {
            let key = (exp.task, exp.channel);
            if res.pretrained.contains_key(&key) {
                continue;
            }
            let dir = require(self.pretrained_dir(exp.task, exp.channel), "pretrain-intent")?;
            let (agent, _) = PolicyAgent::load(&dir)?;
            res.pretrained.insert(key, agent);
        }
        Ok(())
    }

    fn prepare(&self, cells: &[ExperimentConfig]) -> Result<Resources> {
        let channel = cells.first().map_or(self.config.online.channel, |c| c.channel);
        let mut res = self.resources(channel)?;
        self.attach_pretrained(&mut res, cells)?;
        for exp in cells {
            res.ensure_eval(&self.config, exp.task, exp.channel)?;
        }
        Ok(res)
    }

    fn finish_cells(
        &mut self,
        stage: &str,
        cells: &[ExperimentConfig],
        runs: Vec<Result<pipeline::OnlineRun>>,
    ) -> Result<Vec<RunStats>> {
        let mut stats = Vec::new();
        let mut first_err = None;
        for (exp, run) in cells.iter().zip(runs) {
            match run {
                Ok(run) => {
                    let dir = self.root.join("checkpoints").join(exp.name());
                    run.agent.save(&dir, &self.config.generator.valid_combos)?;
                    self.manifest.cells.insert(exp.name(), exp.clone());
                    stats.push(run.stats);
                }
                Err(e) => {
                    log::error!("cell {} failed: {e}", exp.name());
                    first_err.get_or_insert(e);
                }
            }
        }
        let outputs: Vec<PathBuf> = cells
            .iter()
            .map(|e| self.curve_dir().join(format!("{}.csv", e.name())))
            .collect();
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        self.record(stage, &refs, &[("cells", stats.len() as f64)])?;
        match first_err {
            Some(e) => Err(e),
            None => Ok(stats),
        }
    }

    /// The `[online]` run, once per configured seed.
    pub fn run_online(&mut self, mode: Execution) -> Result<Vec<RunStats>> {
        let cells = self
            .config
            .online
            .seeds
            .iter()
            .map(|&s| ExperimentConfig::from_online(&self.config, s))
            .collect::<Result<Vec<_>>>()?;
        let res = self.prepare(&cells)?;
        let runs = pipeline::run_grid(&cells, &res, mode, Some(&self.curve_dir()));
        self.finish_cells("run-online", &cells, runs)
    }

    /// The 12-panel grid; writes `report.csv` from the cells that finished.
    pub fn run_grid(&mut self, mode: Execution) -> Result<Vec<ReportRow>> {
        let cells = ExperimentConfig::grid(&self.config)?;
        let res = self.prepare(&cells)?;
        let runs = pipeline::run_grid(&cells, &res, mode, Some(&self.curve_dir()));
        let outcome = self.finish_cells("run-grid", &cells, runs);
        let rows = self.report()?;
        outcome.map(|_| rows)
    }

    /// Recomputes the report from the stored curves of every recorded cell.
    pub fn summarize(&self) -> Result<Vec<ReportRow>> {
        let mut cells = Vec::new();
        for (name, exp) in &self.manifest.cells {
            let path = require(self.curve_dir().join(format!("{name}.csv")), "run-online")?;
            let curve = LearningCurve::load(&path)?;
            if !curve.is_empty() {
                cells.push((exp.clone(), curve));
            }
        }
        summarize(&cells)
    }

    pub fn report(&mut self) -> Result<Vec<ReportRow>> {
        let rows = self.summarize()?;
        let path = self.report_path();
        write(&path, report_csv(&rows))?;
        self.record("report", &[&path], &[("rows", rows.len() as f64)])?;
        Ok(rows)
    }

    /// A curve writer for an ad-hoc cell outside the configured runs.
    pub fn curve_writer(&self, exp: &ExperimentConfig) -> Result<CurveWriter> {
        CurveWriter::create(&self.curve_dir().join(format!("{}.csv", exp.name())))
    }
}
