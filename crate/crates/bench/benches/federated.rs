use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedwarm_bench::{clients, cnn, dataset, weights};
use fedwarm_core::engine::{aggregate_fedavg, train_user};
use fedwarm_core::{ClientUpdate, Hyperparams, ModelWeights};

fn aggregation(c: &mut Criterion) {
    let base = weights(&cnn());
    let mut group = c.benchmark_group("aggregate_fedavg");
    for clients in [2usize, 8, 32] {
        let updates: Vec<ClientUpdate> = (0..clients)
            .map(|k| ClientUpdate {
                client_id: k,
                weights: ModelWeights {
                    params: base.params.iter().map(|v| v + k as f32 * 1e-3).collect(),
                    ..base.clone()
                },
                sample_count: 100 + k,
            })
            .collect();
        group.bench_function(BenchmarkId::from_parameter(clients), |b| b.iter(|| aggregate_fedavg(&updates).unwrap()));
    }
    group.finish();
}

fn local_training(c: &mut Criterion) {
    let data = dataset(120);
    let parts = clients(&data, 90, 90);
    let spec = cnn();
    let global = weights(&spec);
    let hp = Hyperparams { lr: 0.1, batch_size: 10, local_epochs: 1, rounds: 1, participation_fraction: 1.0, seed: 7 };
    let mut group = c.benchmark_group("train_user");
    group.sample_size(10);
    group.bench_function("cnn_85_samples_1_epoch", |b| {
        b.iter(|| train_user(&parts[0], &global, &data, &spec, &hp, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, aggregation, local_training);
criterion_main!(benches);
