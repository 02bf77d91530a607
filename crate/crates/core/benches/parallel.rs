use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use narle::env::ChannelKind;
use narle::exec::Execution;
use narle::harness::pipeline::{emotion_examples, fit_scope, gen_data, View};
use narle::harness::{run_grid, Config, ExperimentConfig, Resources};
use narle::policy::TaskKind;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid_cells(c: &mut Criterion) {
    let mut cfg = Config::default();
    cfg.data.offline_size = 1000;
    cfg.grid.multiclass_interactions = 2000;
    cfg.grid.multilabel_interactions = 2000;
    let data = gen_data(&cfg).unwrap();
    let mut res = Resources::new(&cfg, data.vocab, None);
    for task in [TaskKind::MultiClass, TaskKind::MultiLabel] {
        res.ensure_pretrained(&cfg, task, ChannelKind::Oracle).unwrap();
    }
    let cells: Vec<ExperimentConfig> = ExperimentConfig::grid(&cfg).unwrap().into_iter().step_by(3).collect();

    let mut group = c.benchmark_group("run_grid");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(run_grid(&cells, &res, mode, None)))
        });
    }
    group.finish();
}

fn scoped_featurization(c: &mut Criterion) {
    let mut cfg = Config::default();
    cfg.data.offline_size = 2000;
    let data = gen_data(&cfg).unwrap();
    let (scope, _) = fit_scope(&cfg, &data).unwrap();

    let mut group = c.benchmark_group("emotion_examples");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(emotion_examples(&data.corpus, &data.vocab, View::Scoped(&scope), mode)))
        });
    }
    group.finish();
}

criterion_group!(benches, grid_cells, scoped_featurization);
criterion_main!(benches);
