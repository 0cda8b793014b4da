use bwr::belief::{simulate_beliefs, BeliefMode};
use bwr::chain::transition_kernel_with;
use bwr::generate::{random_binary_model, BinaryModelOptions};
use bwr::ising::{ising_constants, simulate_actions};
use bwr::scenarios::{example1_model, ising_consensus_model};
use bwr::{Execution, RunConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn config(horizon: usize, trials: usize, execution: Execution) -> RunConfig {
    RunConfig {
        execution,
        ..RunConfig::new(horizon, trials, 0)
    }
}

fn beliefs(c: &mut Criterion) {
    let model = example1_model();
    let mut group = c.benchmark_group("example1_circle_beliefs");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_beliefs(&model, BeliefMode::Circle, None, &config(2000, 20, execution)).unwrap())
        });
    }
    group.finish();
}

fn actions(c: &mut Criterion) {
    let model = ising_consensus_model();
    let constants = ising_constants(&model).unwrap();
    let mut group = c.benchmark_group("consensus_actions");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_actions(&model, &constants, &config(200, 2000, execution)).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let opts = BinaryModelOptions {
        agents: 12..=12,
        ..BinaryModelOptions::default()
    };
    let model = random_binary_model(&mut rng, &opts);
    let constants = ising_constants(&model).unwrap();
    let mut group = c.benchmark_group("kernel_12_agents");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| transition_kernel_with(&model, &constants, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, beliefs, actions, kernel);
criterion_main!(benches);
