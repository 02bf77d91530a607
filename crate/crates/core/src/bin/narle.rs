use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use narle::exec::Execution;
use narle::harness::{report_csv, Config, RunDir};
use narle::policy::TaskKind;

#[derive(Parser)]
#[command(
    name = "narle",
    version,
    about = "REINFORCE intent learning from task-scoped implicit emotion"
)]
struct Cli {
    /// TOML config. Defaults to `<run-dir>/config.toml` if present, else built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "runs/default")]
    run_dir: PathBuf,
    /// Global seed; overrides NARLE_SEED and the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run grid cells and featurization on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Multiclass,
    Multilabel,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Multiclass => TaskKind::MultiClass,
            Task::Multilabel => TaskKind::MultiLabel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled offline corpus and vocabulary.
    GenData {
        /// Number of offline records.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train the sentence scope model.
    TrainScope,
    /// Train the emotion classifier on scoped sentences.
    TrainEmotion,
    /// Supervised pretraining of the intent model on a skewed subset.
    PretrainIntent {
        #[arg(long, value_enum, default_value = "multiclass")]
        task: Task,
    },
    /// The `[online]` experiment, once per configured seed.
    RunOnline {
        #[arg(long)]
        interactions: Option<u64>,
    },
    /// All task x init x regime cells over the configured seeds.
    RunGrid,
    /// Recompute report.csv from stored curves.
    Report,
}

fn load_config(cli: &Cli) -> narle::Result<Config> {
    let snapshot = cli.run_dir.join("config.toml");
    let path = match &cli.config {
        Some(p) => Some(p.as_path()),
        None if snapshot.exists() => Some(snapshot.as_path()),
        None => None,
    };
    Ok(Config::load(path)?.with_seed_override(cli.seed))
}

fn run(cli: Cli) -> narle::Result<()> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::GenData { n: Some(n) } => config.data.offline_size = *n,
        Command::RunOnline { interactions: Some(n) } => {
            let o = &mut config.online;
            o.interactions = *n;
            if *n > 0 && (o.window > *n || o.eval_every > *n) {
                log::warn!("clamping window and eval_every to {n} interactions");
                o.window = o.window.min(*n);
                o.eval_every = o.eval_every.min(*n);
            }
        }
        _ => {}
    }
    config.validate()?;
    let mode = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let mut dir = RunDir::open(&cli.run_dir, config)?;
    match cli.command {
        Command::GenData { .. } => {
            let data = dir.gen_data()?;
            println!("records={} vocab={}", data.corpus.len(), data.vocab.len());
        }
        Command::TrainScope => {
            dir.train_scope()?;
            let rec = &dir.manifest().stages["train-scope"];
            println!("heldout_f1={:.4}", rec.metrics["heldout_f1"]);
        }
        Command::TrainEmotion => {
            dir.train_emotion(mode)?;
            let m = &dir.manifest().stages["train-emotion"].metrics;
            println!(
                "heldout_accuracy={:.4} distractor_scoped={:.4} distractor_unscoped={:.4}",
                m["heldout_accuracy"], m["distractor_scoped_accuracy"], m["distractor_unscoped_accuracy"]
            );
        }
        Command::PretrainIntent { task } => {
            let report = dir.pretrain_intent(task.into())?;
            println!("baseline_accuracy={:.4}", report.baseline_accuracy);
        }
        Command::RunOnline { .. } => {
            for (seed, stats) in dir.config().online.seeds.clone().iter().zip(dir.run_online(mode)?) {
                println!(
                    "seed={seed} interactions={} success={:.4} reward_agreement={:.4}",
                    stats.interactions,
                    stats.correct as f64 / stats.interactions.max(1) as f64,
                    stats.reward_agreement()
                );
            }
        }
        Command::RunGrid => print!("{}", report_csv(&dir.run_grid(mode)?)),
        Command::Report => print!("{}", report_csv(&dir.report()?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
