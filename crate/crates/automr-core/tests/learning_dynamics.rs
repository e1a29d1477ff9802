//! End-to-end learning behavior on the scripted environment at a feasible
//! learning rate. Separates "the REINFORCE machinery works" from the
//! acceptance suite's pinned-hyperparameter run.

use automr_core::{
    backend::scripted_dataset, train, NullSink, PolicyDims, ReasoningBackend, SamplerConfig,
    ScriptedBackend, ScriptedEnvSpec, SearchConfig, StrategyCatalog,
};

#[test]
fn reward_climbs_from_uniform_to_target_policy() {
    let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
    let dataset = scripted_dataset(backend.spec(), 16);
    let catalog = StrategyCatalog::builtin();
    let dims = PolicyDims::new(backend.contract().embedding_dim, 32, 256);
    let config = SearchConfig {
        queries_per_batch: 8,
        samples_per_query: 16,
        learning_rate: 2e-2,
        clip_norm: 1.0,
        iterations: 220,
        checkpoint_interval: 0,
        seed: 5,
        sampler: SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        },
        ..SearchConfig::default()
    };

    let (_, curve) = train(&dataset, &config, &backend, &catalog, dims, &mut NullSink).unwrap();

    let initial = curve.points.first().unwrap().mean_reward;
    assert!(
        (initial - (-0.75)).abs() <= 0.15,
        "initial mean reward {initial} far from the uniform-policy expectation -0.75"
    );

    let trailing = curve.trailing_mean_reward(20);
    assert!(
        trailing >= 0.8,
        "final 20-iteration mean reward {trailing} below +0.8"
    );

    // The 20-iteration moving average climbs and never slides back by more
    // than batch noise.
    let ma20: Vec<f64> = (20..=curve.points.len())
        .step_by(20)
        .map(|end| {
            curve.points[end - 20..end]
                .iter()
                .map(|p| p.mean_reward)
                .sum::<f64>()
                / 20.0
        })
        .collect();
    for pair in ma20.windows(2) {
        assert!(
            pair[1] >= pair[0] - 0.05,
            "20-iteration moving average regressed: {ma20:?}"
        );
    }
    assert!(
        ma20.last().unwrap() - ma20.first().unwrap() > 1.0,
        "no substantial climb: {ma20:?}"
    );
}
