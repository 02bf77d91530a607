//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines always
//! print.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use narle::emotion::{reward_of, EmotionLabel};
use narle::env::{apply_regime, audit, build_offline_corpus, ChannelKind, FeedbackRegime, Register};
use narle::exec::Execution;
use narle::harness::pipeline::{fit_emotion, fit_scope, gen_data};
use narle::harness::{run_grid, Config, ExperimentConfig, InitKind, LearningCurve, OnlineRun, Resources, RunDir};
use narle::policy::TaskKind;
use narle::seed::rng_for;

const SEEDS: [u64; 3] = [1, 2, 3];

type Outcome = Result<(bool, String), String>;

fn cell(
    cfg: &Config,
    task: TaskKind,
    init: InitKind,
    regime: FeedbackRegime,
    interactions: u64,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        task,
        init,
        regime,
        channel: ChannelKind::Oracle,
        interactions,
        eval_every: cfg.online.eval_every,
        window: cfg.online.window,
        seed,
        policy: cfg.policy.clone(),
    }
}

/// Shared oracle-channel state: offline vocabulary, eval sets, pretrained agents.
struct World {
    cfg: Config,
    res: Resources,
    baseline: BTreeMap<TaskKind, f64>,
    curves: BTreeMap<String, LearningCurve>,
}

impl World {
    fn new() -> narle::Result<Self> {
        let cfg = Config::default();
        let data = gen_data(&cfg)?;
        let mut res = Resources::new(&cfg, data.vocab, None);
        let mut baseline = BTreeMap::new();
        for task in [TaskKind::MultiClass, TaskKind::MultiLabel] {
            let report = res.ensure_pretrained(&cfg, task, ChannelKind::Oracle)?;
            baseline.insert(task, report.baseline_accuracy);
        }
        Ok(World {
            cfg,
            res,
            baseline,
            curves: BTreeMap::new(),
        })
    }

    /// Runs (or recalls) one cell per seed.
    fn curves(
        &mut self,
        task: TaskKind,
        init: InitKind,
        regime: FeedbackRegime,
        n: u64,
    ) -> narle::Result<Vec<LearningCurve>> {
        let cells: Vec<ExperimentConfig> = SEEDS
            .iter()
            .map(|&s| cell(&self.cfg, task, init, regime, n, s))
            .collect();
        let todo: Vec<ExperimentConfig> = cells
            .iter()
            .filter(|c| !self.curves.contains_key(&key(c)))
            .cloned()
            .collect();
        for (c, run) in todo.iter().zip(run_grid(&todo, &self.res, Execution::Parallel, None)) {
            let run: OnlineRun = run?;
            self.curves.insert(key(c), run.curve);
        }
        Ok(cells.iter().map(|c| self.curves[&key(c)].clone()).collect())
    }
}

fn key(c: &ExperimentConfig) -> String {
    format!("{}-n{}", c.name(), c.interactions)
}

fn finals(curves: &[LearningCurve]) -> Vec<f64> {
    curves.iter().map(|c| c.final_success().unwrap_or(0.0)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let (rl, ce) = common::grad_check(&common::random_grad_case(50_000 + seed));
        worst = (worst.0.max(rl), worst.1.max(ce));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst.0 < 1e-4 && worst.1 < 1e-4 && secs < 30.0,
        format!(
            "100 cases, max rel err reinforce {:.2e} cross-entropy {:.2e}, {secs:.1}s",
            worst.0, worst.1
        ),
    ))
}

fn reward_mapping() -> Outcome {
    let got: Vec<f32> = EmotionLabel::ALL.iter().map(|&l| reward_of(l)).collect();
    Ok((got == [1.0, -1.0, 0.0], format!("positive/negative/neutral -> {got:?}")))
}

fn regime_statistics() -> Outcome {
    let n = 100_000;
    let mut rng = rng_for(3, "acceptance.partial");
    let present = (0..n)
        .filter(|_| apply_regime(&FeedbackRegime::partial(), &mut rng, EmotionLabel::Positive).0)
        .count();
    let rate = present as f64 / n as f64;
    let mut rng = rng_for(3, "acceptance.noisy");
    // Corruption is measured over 100k present rewards.
    let (mut shown, mut wrong) = (0usize, 0usize);
    while shown < n {
        let label = EmotionLabel::ALL[shown % 3];
        let (p, observed) = apply_regime(&FeedbackRegime::partial_noisy(), &mut rng, label);
        if p {
            shown += 1;
            wrong += usize::from(observed != label);
        }
    }
    let frac = wrong as f64 / shown as f64;
    Ok((
        (rate - 0.15).abs() <= 0.005 && (frac - 1.0 / 3.0).abs() <= 0.01,
        format!("presence {rate:.4} (0.15 +- 0.005), corruption {frac:.4} (1/3 +- 0.01)"),
    ))
}

fn scratch_learning(w: &mut World) -> Outcome {
    let t = Instant::now();
    let curves = w
        .curves(TaskKind::MultiClass, InitKind::Scratch, FeedbackRegime::Full, 20_000)
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let starts: Vec<f64> = curves.iter().map(|c| c.rows[0].rolling_success).collect();
    let peaks: Vec<f64> = curves
        .iter()
        .map(|c| c.rows.iter().map(|r| r.rolling_success).fold(0.0, f64::max))
        .collect();
    let ok = starts.iter().all(|s| (s - 1.0 / 3.0).abs() <= 0.05) && peaks.iter().all(|&p| p >= 0.85) && secs < 300.0;
    Ok((
        ok,
        format!(
            "start {} (1/3 +- 0.05), best within 20k {} (>= 0.85), {secs:.1}s",
            fmt(&starts),
            fmt(&peaks)
        ),
    ))
}

fn partial_matches_full(w: &mut World) -> Outcome {
    let full = finals(
        &w.curves(TaskKind::MultiClass, InitKind::Scratch, FeedbackRegime::Full, 20_000)
            .map_err(|e| e.to_string())?,
    );
    let partial = finals(
        &w.curves(
            TaskKind::MultiClass,
            InitKind::Scratch,
            FeedbackRegime::partial(),
            60_000,
        )
        .map_err(|e| e.to_string())?,
    );
    let gap = mean(&full) - mean(&partial);
    Ok((
        gap.abs() <= 0.05,
        format!(
            "full@20k {} partial@60k {}, mean gap {gap:.3} (<= 0.05)",
            fmt(&full),
            fmt(&partial)
        ),
    ))
}

fn noisy_degrades(w: &mut World) -> Outcome {
    let n = w.cfg.grid.multilabel_interactions;
    let mut detail = Vec::new();
    let mut gaps = BTreeMap::new();
    for init in [InitKind::Pretrained, InitKind::Scratch] {
        let partial = finals(
            &w.curves(TaskKind::MultiLabel, init, FeedbackRegime::partial(), n)
                .map_err(|e| e.to_string())?,
        );
        let noisy = finals(
            &w.curves(TaskKind::MultiLabel, init, FeedbackRegime::partial_noisy(), n)
                .map_err(|e| e.to_string())?,
        );
        let gap = mean(&partial) - mean(&noisy);
        gaps.insert(init, gap);
        detail.push(format!(
            "{} partial {} noisy {} gap {gap:.3}",
            init.name(),
            fmt(&partial),
            fmt(&noisy)
        ));
    }
    Ok((
        gaps[&InitKind::Pretrained] >= 0.05,
        format!("multilabel@{n}: {} (pretrained gap >= 0.05)", detail.join("; ")),
    ))
}

fn pretraining_uplift(w: &mut World) -> Outcome {
    let base = w.baseline[&TaskKind::MultiClass];
    let window = w.cfg.online.window;
    let pre = w
        .curves(TaskKind::MultiClass, InitKind::Pretrained, FeedbackRegime::Full, 20_000)
        .map_err(|e| e.to_string())?;
    let scratch = w
        .curves(TaskKind::MultiClass, InitKind::Scratch, FeedbackRegime::Full, 20_000)
        .map_err(|e| e.to_string())?;
    let uplift = mean(&finals(&pre)) / base - 1.0;
    let reach = |cs: &[LearningCurve]| -> Option<Vec<f64>> {
        cs.iter().map(|c| c.steps_to(0.80, window).map(|s| s as f64)).collect()
    };
    let (steps_pre, steps_scratch) = (reach(&pre), reach(&scratch));
    let faster = match (&steps_pre, &steps_scratch) {
        (Some(p), Some(s)) => mean(p) <= 0.5 * mean(s),
        _ => false,
    };
    let ok = (0.55..=0.70).contains(&base) && uplift >= 0.20 && faster;
    Ok((
        ok,
        format!(
            "baseline {base:.3} (0.55..0.70), final {} uplift {:.1}% (>= 20%), steps to 0.80 pretrained {} scratch {} (<= half)",
            fmt(&finals(&pre)),
            100.0 * uplift,
            steps_pre.map_or("never".into(), |v| format!("{:.0}", mean(&v))),
            steps_scratch.map_or("never".into(), |v| format!("{:.0}", mean(&v)))
        ),
    ))
}

fn scoping_benefit() -> Outcome {
    let cfg = Config::default();
    let data = gen_data(&cfg).map_err(|e| e.to_string())?;
    let (scope, _) = fit_scope(&cfg, &data).map_err(|e| e.to_string())?;
    let (_, report) = fit_emotion(&cfg, &data, &scope, Execution::Parallel).map_err(|e| e.to_string())?;
    let (s, u) = (report.distractor_scoped.accuracy, report.distractor_unscoped.accuracy);
    let held = report.scoped.heldout.accuracy;
    Ok((
        s - u >= 0.03 && held >= 0.90,
        format!("distractor-heavy scoped {s:.3} unscoped {u:.3} (gap >= 0.03), held-out {held:.3} (>= 0.90)"),
    ))
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Every stage of a small run, learned channel, pretrained init.
fn pipeline_once(root: &Path, mode: Execution) -> narle::Result<BTreeMap<String, Vec<u8>>> {
    let mut cfg = Config::default();
    cfg.data.offline_size = 1200;
    cfg.online.channel = ChannelKind::Learned;
    cfg.online.init = InitKind::Pretrained;
    cfg.online.interactions = 1500;
    let mut dir = RunDir::open(root, cfg)?;
    dir.gen_data()?;
    dir.train_scope()?;
    dir.train_emotion(mode)?;
    dir.pretrain_intent(TaskKind::MultiClass)?;
    dir.run_online(mode)?;
    let mut files = files_under(&root.join("curves"));
    files.extend(
        files_under(&root.join("checkpoints"))
            .into_iter()
            .map(|(k, v)| (format!("checkpoints/{k}"), v)),
    );
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = pipeline_once(&tmp.path().join("a"), Execution::Parallel).map_err(|e| e.to_string())?;
    let b = pipeline_once(&tmp.path().join("b"), Execution::Parallel).map_err(|e| e.to_string())?;
    let c = pipeline_once(&tmp.path().join("c"), Execution::Sequential).map_err(|e| e.to_string())?;
    let differing: Vec<&String> = a
        .keys()
        .filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k))
        .collect();
    let ok = !a.is_empty() && a.len() == b.len() && a.len() == c.len() && differing.is_empty();
    Ok((
        ok,
        format!(
            "{} curve/checkpoint files, {} differ across 3 runs (one sequential)",
            a.len(),
            differing.len()
        ),
    ))
}

fn synthesis_contract() -> Outcome {
    let cfg = Config::default();
    let mut rng = rng_for(10, "acceptance.audit");
    let corpus = build_offline_corpus(&cfg.generator, &mut rng, 10_000).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let mut general_only = 0;
    for m in &corpus {
        violations += audit(m).len();
        let directed = m.injections.iter().any(|i| i.register == Register::Directed);
        let general = m.injections.iter().any(|i| i.register == Register::General);
        if general && !directed {
            general_only += 1;
            violations += usize::from(m.emotion != EmotionLabel::Neutral);
        }
    }
    Ok((
        violations == 0 && general_only > 0,
        format!("10000 samples, {general_only} general-only, {violations} violations"),
    ))
}

fn main() {
    let t = Instant::now();
    let mut world = World::new();
    let mut with_world = |f: fn(&mut World) -> Outcome| -> Outcome {
        match &mut world {
            Ok(w) => f(w),
            Err(e) => Err(format!("setup failed: {e}")),
        }
    };
    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "gradient correctness", gradients()),
        (2, "reward mapping", reward_mapping()),
        (3, "feedback-regime statistics", regime_statistics()),
        (4, "scratch learning", with_world(scratch_learning)),
        (5, "partial comparable to full", with_world(partial_matches_full)),
        (6, "noisy degradation", with_world(noisy_degrades)),
        (7, "pretraining uplift", with_world(pretraining_uplift)),
        (8, "scoping benefit", scoping_benefit()),
        (9, "determinism", determinism()),
        (10, "dataset-synthesis contract", synthesis_contract()),
    ];
    let mut failed = 0;
    for (id, name, outcome) in results {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "criterion {id:>2} {} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} of 10 passed in {:.1}s",
        10 - failed,
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
