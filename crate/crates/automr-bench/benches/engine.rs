use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use automr_core::{
    batch_update, encode_decision_input, forced_replay, forward, logprob_and_grad,
    sample_skeleton, skeleton::random_structure, DatasetRecord, MockBackend, PolicyDims,
    PolicyParameters, SamplerConfig, SearchConfig, Strategy, StrategyCatalog, TaskKind,
};

fn policy_dims() -> PolicyDims {
    PolicyDims::new(64, 32, 256)
}

fn bench_policy(c: &mut Criterion) {
    let params = PolicyParameters::init(policy_dims(), 7).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let unit: Vec<f64> = {
        let v: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    };
    let features = encode_decision_input(
        &params,
        &unit,
        &[Strategy::Next, Strategy::Zero],
        &[unit.clone(), unit.clone()],
    )
    .unwrap();

    c.bench_function("policy_forward_h256", |b| {
        b.iter(|| forward(&params, &features).unwrap())
    });
    c.bench_function("policy_logprob_grad_h256", |b| {
        b.iter(|| logprob_and_grad(&params, &features, Strategy::Recall).unwrap())
    });
}

fn bench_sampler(c: &mut Criterion) {
    let params = PolicyParameters::init(policy_dims(), 7).unwrap();
    let backend = MockBackend::new(64);
    let catalog = StrategyCatalog::builtin();
    let config = SamplerConfig {
        budget: 1024,
        ..SamplerConfig::default()
    };

    c.bench_function("sample_episode_budget1024", |b| {
        let mut seed = 0u64;
        b.iter_batched(
            || {
                seed += 1;
                ChaCha12Rng::seed_from_u64(seed)
            },
            |mut rng| {
                sample_skeleton("bench query", &params, &backend, &catalog, &config, &mut rng)
                    .unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    c.bench_function("forced_replay_8_nodes", |b| {
        let mut structure_rng = ChaCha12Rng::seed_from_u64(3);
        let structure = random_structure(&mut structure_rng, 8, 256);
        let mut seed = 0u64;
        b.iter_batched(
            || {
                seed += 1;
                ChaCha12Rng::seed_from_u64(seed)
            },
            |mut rng| {
                forced_replay(
                    &structure,
                    "bench query",
                    &params,
                    &backend,
                    &catalog,
                    &config,
                    &mut rng,
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_batch_update(c: &mut Criterion) {
    let params = PolicyParameters::init(policy_dims(), 7).unwrap();
    let backend = MockBackend::new(64);
    let catalog = StrategyCatalog::builtin();
    let config = SearchConfig {
        samples_per_query: 4,
        sampler: SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        },
        ..SearchConfig::default()
    };
    let batch: Vec<DatasetRecord> = (0..2)
        .map(|k| DatasetRecord {
            query: format!("query {k}"),
            answer: "gold".into(),
            task: TaskKind::Generic,
        })
        .collect();

    c.bench_function("batch_update_2x4_budget64", |b| {
        let mut seed = 0u64;
        b.iter_batched(
            || {
                seed += 1;
                ChaCha12Rng::seed_from_u64(seed)
            },
            |mut rng| {
                batch_update(&params, &batch, &backend, &catalog, &config, &mut rng).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_policy, bench_sampler, bench_batch_update);
criterion_main!(benches);
