use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use semcode::agent::{train_hierarchical, Scenario, TrainConfig};
use semcode::env::{gen_model, GenSpec, SyntheticEnv};
use semcode::mode::{ChildGranularity, ModeSpace};
use semcode::oracle::{evaluate_space, DEFAULT_SEARCH_CAP};
use semcode::Exec;

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_enumeration");
    group.sample_size(10);
    let model = gen_model(1, &GenSpec::default()).unwrap();
    for (name, granularity) in [
        ("per_gop", ChildGranularity::PerGop),
        ("per_frame", ChildGranularity::PerDecidedFrame),
    ] {
        let space = ModeSpace {
            child_granularity: granularity,
            ..ModeSpace::default()
        };
        let env = SyntheticEnv::new(model.clone(), space).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            group.bench_with_input(BenchmarkId::new(name, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| evaluate_space(&env, env.space(), DEFAULT_SEARCH_CAP, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let mut group = c.benchmark_group("training_rollouts");
    group.sample_size(10);
    let env = SyntheticEnv::new(gen_model(1, &GenSpec::default()).unwrap(), ModeSpace::default()).unwrap();
    for parallel in [false, true] {
        let config = TrainConfig {
            iterations: 50,
            calibration_samples: 32,
            parallel_rollouts: parallel,
            lambda: 0.2,
            ..TrainConfig::default()
        };
        let label = if parallel { "Parallel" } else { "Sequential" };
        group.bench_function(label, |b| {
            b.iter(|| train_hierarchical(Scenario::synthetic(&env), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, rollouts);
criterion_main!(benches);
