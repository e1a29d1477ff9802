//! Acceptance suite: one test per criterion, each printing a single
//! `[PASS]`/`[FAIL]` line (run with `-- --nocapture` to see them live).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use automr_core::{
    backend::scripted_dataset, forced_replay, gradient_check, random_search_baseline, reward,
    sample_skeleton, skeleton::random_structure, skeleton_log_prob, train, AnswerMatcher,
    MockBackend, NullSink, PolicyDims, PolicyParameters, ReasoningBackend, SamplerConfig,
    ScriptedBackend, ScriptedEnvSpec, SearchConfig, Skeleton, Strategy, StrategyCatalog,
};

/// Fixed master seed of the acceptance runs.
const ACCEPTANCE_SEED: u64 = 5;

fn pass(line: &str) {
    println!("[PASS] {line}");
}

#[test]
fn criterion_1_structural_coverage() {
    let start = Instant::now();
    let mut cases = 0usize;

    for k in 1..=6 {
        for strategy in Strategy::NON_ZERO {
            let s = Skeleton::sequential(k, strategy).unwrap();
            assert!(s.validate().is_ok(), "sequential({k}, {strategy})");
            cases += 1;
        }
    }

    for branches in 1..=6usize {
        for length in 1..=6usize {
            let lengths = vec![length; branches];
            let s = Skeleton::parallel(&lengths, Strategy::Explore).unwrap();
            assert!(s.validate().is_ok(), "parallel({lengths:?})");
            cases += 1;
        }
        // mixed branch lengths
        let mixed: Vec<usize> = (1..=branches).collect();
        let s = Skeleton::parallel(&mixed, Strategy::Next).unwrap();
        assert!(s.validate().is_ok(), "parallel({mixed:?})");
        cases += 1;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(ACCEPTANCE_SEED);
    for non_root in 1..=6usize {
        for _ in 0..20 {
            let parents: Vec<usize> = (1..=non_root).map(|c| rng.gen_range(0..c)).collect();
            let labels: Vec<Strategy> = (0..non_root)
                .map(|_| Strategy::NON_ZERO[rng.gen_range(0..7)])
                .collect();
            let s = Skeleton::tree(&parents, &labels).unwrap();
            assert!(s.validate().is_ok(), "tree({parents:?})");
            cases += 1;
        }
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "[FAIL] criterion 1: took {elapsed:?}, limit 1 s"
    );
    pass(&format!(
        "criterion 1: structural coverage — {cases} constructed skeletons all validate ({elapsed:?})"
    ));
}

#[test]
fn criterion_2_derivability_by_forced_replay() {
    let start = Instant::now();
    let params = PolicyParameters::init(PolicyDims::new(64, 32, 64), ACCEPTANCE_SEED).unwrap();
    let backend = MockBackend::new(64);
    let catalog = StrategyCatalog::builtin();
    let config = SamplerConfig {
        budget: 256,
        ..SamplerConfig::default()
    };

    let mut rng = ChaCha12Rng::seed_from_u64(ACCEPTANCE_SEED.wrapping_add(2));
    for case in 0..500 {
        let structure = random_structure(&mut rng, 8, 256);
        let v = structure.node_count();
        let (trace, mlp_calls) = forced_replay(
            &structure,
            &format!("query {case}"),
            &params,
            &backend,
            &catalog,
            &config,
            &mut rng,
        )
        .unwrap();
        assert_eq!(
            trace.skeleton.node_count(),
            v,
            "case {case}: node count mismatch"
        );
        assert_eq!(
            trace.skeleton.sorted_edges(),
            structure.sorted_edges(),
            "case {case}: labeled edge set mismatch"
        );
        assert!(
            mlp_calls <= v * (v + 1) / 2,
            "case {case}: {mlp_calls} MLP calls exceeds |V|(|V|+1)/2 = {}",
            v * (v + 1) / 2
        );
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "[FAIL] criterion 2: took {elapsed:?}, limit 30 s"
    );
    pass(&format!(
        "criterion 2: derivability — 500 fuzzed structures reproduced exactly within the MLP-call bound ({elapsed:?})"
    ));
}

#[test]
fn criterion_3_logprob_factorization_fidelity() {
    let backend = MockBackend::new(64);
    let catalog = StrategyCatalog::builtin();
    let dims = PolicyDims::new(64, 32, 64);

    let mut rng = ChaCha12Rng::seed_from_u64(ACCEPTANCE_SEED.wrapping_add(3));
    for episode in 0..200 {
        let params = PolicyParameters::init(dims, rng.gen()).unwrap();
        let config = SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        };
        let trace = sample_skeleton(
            &format!("episode {episode}"),
            &params,
            &backend,
            &catalog,
            &config,
            &mut rng,
        )
        .unwrap();
        let recomputed = skeleton_log_prob(&params, &trace, false).unwrap();
        assert!(
            (recomputed - trace.core_log_prob).abs() <= 1e-10,
            "episode {episode}: {recomputed} vs {}",
            trace.core_log_prob
        );
    }

    // Uniform policy, |V| = 3 structure: exactly 3 * ln(1/8).
    let uniform = PolicyParameters::zeros(dims).unwrap();
    let structure = Skeleton::sequential(2, Strategy::Next).unwrap();
    let config = SamplerConfig {
        budget: 64,
        ..SamplerConfig::default()
    };
    let (trace, _) = forced_replay(
        &structure,
        "uniform",
        &uniform,
        &backend,
        &catalog,
        &config,
        &mut rng,
    )
    .unwrap();
    let lp = skeleton_log_prob(&uniform, &trace, false).unwrap();
    let expected = 3.0 * (1.0f64 / 8.0).ln();
    assert!(
        (lp - expected).abs() < 1e-12,
        "uniform |V|=3 log-prob {lp} vs {expected}"
    );

    pass(&format!(
        "criterion 3: factorized log-prob — 200 episodes within 1e-10; uniform |V|=3 gives {lp:.7} = 3·ln(1/8)"
    ));
}

#[test]
fn criterion_4_gradient_correctness() {
    let start = Instant::now();
    let report = gradient_check(PolicyDims::new(16, 8, 32), ACCEPTANCE_SEED, 40).unwrap();
    let elapsed = start.elapsed();
    assert!(report.coords_checked >= 200, "need at least 200 coordinates");
    assert!(
        report.max_relative_error <= 1e-4,
        "[FAIL] criterion 4: max relative error {} exceeds 1e-4",
        report.max_relative_error
    );
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "[FAIL] criterion 4: took {elapsed:?}, limit 10 s"
    );
    pass(&format!(
        "criterion 4: gradients — {} coordinates, max relative error {:.2e} ({elapsed:?})",
        report.coords_checked, report.max_relative_error
    ));
}

fn scripted_learning_config(iterations: usize) -> (ScriptedBackend, Vec<automr_core::DatasetRecord>, SearchConfig, PolicyDims) {
    let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
    let dataset = scripted_dataset(backend.spec(), 16);
    let dims = PolicyDims::new(backend.contract().embedding_dim, 32, 256);
    let config = SearchConfig {
        queries_per_batch: 8,
        samples_per_query: 16,
        learning_rate: 5e-4,
        clip_norm: 1.0,
        iterations,
        checkpoint_interval: 0,
        seed: ACCEPTANCE_SEED,
        sampler: SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        },
        ..SearchConfig::default()
    };
    (backend, dataset, config, dims)
}

#[test]
fn criterion_5_end_to_end_learning() {
    let (backend, dataset, config, dims) = scripted_learning_config(300);
    let catalog = StrategyCatalog::builtin();

    let start = Instant::now();
    let (_, curve) = train(&dataset, &config, &backend, &catalog, dims, &mut NullSink).unwrap();
    let elapsed = start.elapsed();

    let initial = curve.points.first().map(|p| p.mean_reward).unwrap();
    let trailing = curve.trailing_mean_reward(20);
    println!(
        "[info] criterion 5: N=8 M=16 eta=5e-4 clip=1.0 budget=64 seed={ACCEPTANCE_SEED}: \
         initial mean reward {initial:+.3}, final 20-iteration mean {trailing:+.3}, {elapsed:?}"
    );

    assert!(
        elapsed.as_secs_f64() < 300.0,
        "[FAIL] criterion 5: runtime {elapsed:?} exceeds 5 min"
    );
    assert!(
        (initial - (-0.75)).abs() <= 0.1,
        "[FAIL] criterion 5: initial mean reward {initial} outside -0.75 +- 0.1"
    );

    // Bit-exact reproducibility of the curve under the same seed.
    let (_, again) = train(&dataset, &config, &backend, &catalog, dims, &mut NullSink).unwrap();
    assert_eq!(
        curve.to_jsonl(),
        again.to_jsonl(),
        "[FAIL] criterion 5: same-seed curves differ"
    );

    if trailing >= 0.8 {
        pass(&format!(
            "criterion 5: learning — initial {initial:+.3}, final 20-iteration mean {trailing:+.3} >= +0.8, bit-exact replay ({elapsed:?})"
        ));
    } else {
        println!(
            "[FAIL] criterion 5: final 20-iteration mean reward {trailing:+.3} < +0.8 after 300 iterations \
             at the pinned eta=5e-4/clip=1.0. The clipped update caps the parameter displacement at \
             eta*clip per iteration (0.15 total over 300), an order of magnitude short of the ~4-unit \
             logit gap a 0.9 first-decision probability needs; the same engine at eta=2e-2 exceeds +0.8 \
             within 150 iterations (see the learning_dynamics integration test)."
        );
        panic!("criterion 5 unattainable at the pinned hyperparameters (see analysis above)");
    }
}

#[test]
fn criterion_6_budget_safety() {
    let params = PolicyParameters::init(PolicyDims::new(64, 32, 64), ACCEPTANCE_SEED).unwrap();
    let backend = MockBackend::new(64);
    let catalog = StrategyCatalog::builtin();

    let mut episodes = 0usize;
    let mut rng = ChaCha12Rng::seed_from_u64(ACCEPTANCE_SEED.wrapping_add(6));
    for budget in [0usize, 1, 16, 1024] {
        let config = SamplerConfig {
            budget,
            ..SamplerConfig::default()
        };
        for episode in 0..250 {
            let trace = sample_skeleton(
                &format!("b{budget} e{episode}"),
                &params,
                &backend,
                &catalog,
                &config,
                &mut rng,
            )
            .unwrap();
            assert!(
                trace.skeleton.budget_used() <= budget,
                "budget {budget}: used {}",
                trace.skeleton.budget_used()
            );
            episodes += 1;
        }
    }
    assert_eq!(episodes, 1000);
    pass("criterion 6: budget safety — 1000 episodes across budgets {0, 1, 16, 1024}, zero violations");
}

#[test]
fn criterion_7_reward_contract() {
    let matcher = AnswerMatcher::Normalized;
    let table: [(&str, &str, i32); 20] = [
        ("72", "72", 1),
        ("72", "71", -1),
        ("A", "a.", 1),
        ("yes", "  YES  ", 1),
        ("3.14", "3.14", 1),
        ("42", "42.", 1),
        ("Paris", "paris", 1),
        ("x+y", "X+Y", 1),
        ("-5", "-5", 1),
        ("1/2", "1/2", 1),
        ("72", "", -1),
        ("a", "b", -1),
        ("42", "420", -1),
        ("yes", "no", -1),
        ("1", "2", -1),
        ("x", "y,", -1),
        ("true", "false", -1),
        ("0", "O", -1),
        ("abc", "ab", -1),
        ("7", "seven", -1),
    ];
    for (gold, predicted, expected) in table {
        assert_eq!(
            reward(gold, predicted, matcher),
            expected,
            "reward({gold:?}, {predicted:?})"
        );
    }
    pass("criterion 7: reward contract — 20 gold/predicted pairs reproduce +1/-1 under the normalizing matcher");
}

#[test]
fn criterion_8_random_search_selects_target_first_edge() {
    let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
    let target = backend.spec().target_strategy;
    let dataset = scripted_dataset(backend.spec(), 6);
    let catalog = StrategyCatalog::builtin();
    let config = SearchConfig {
        sampler: SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        },
        ..SearchConfig::default()
    };

    let mut successes = 0usize;
    for run in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + run);
        let (structure, _) =
            random_search_baseline(&dataset, &backend, &catalog, 48, &config, &mut rng).unwrap();
        let first_edge = structure
            .edges
            .iter()
            .find(|e| e.from == 0 && e.to == 1)
            .map(|e| e.strategy);
        if first_edge == Some(target) {
            successes += 1;
        }
    }
    assert!(
        successes >= 19,
        "[FAIL] criterion 8: only {successes}/20 runs selected a {target}-first structure"
    );
    pass(&format!(
        "criterion 8: random search — {successes}/20 seeded runs selected a structure whose first edge is {target}"
    ));
}
