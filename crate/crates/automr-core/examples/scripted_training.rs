//! Trains the policy on the scripted environment and prints the learning
//! curve. Environment variables override the defaults:
//! ETA, ITERS, SEED, H, STEP_TOKENS, N, M.

use automr_core::{
    train, NullSink, PolicyDims, SamplerConfig, ScriptedBackend, ScriptedEnvSpec, SearchConfig,
    StrategyCatalog,
};

fn env_or<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let eta: f64 = env_or("ETA", 2e-2);
    let iterations: usize = env_or("ITERS", 200);
    let seed: u64 = env_or("SEED", 42);
    let hidden: usize = env_or("H", 256);
    let step_tokens: usize = env_or("STEP_TOKENS", 16);
    let n: usize = env_or("N", 8);
    let m: usize = env_or("M", 16);

    let spec = ScriptedEnvSpec {
        step_tokens,
        ..ScriptedEnvSpec::default()
    };
    let backend = ScriptedBackend::new(spec).expect("valid spec");
    let dataset = automr_core::backend::scripted_dataset(backend.spec(), 16);
    let catalog = StrategyCatalog::builtin();
    let dims = PolicyDims::new(backend.contract().embedding_dim, 32, hidden);
    let config = SearchConfig {
        queries_per_batch: n,
        samples_per_query: m,
        learning_rate: eta,
        clip_norm: 1.0,
        iterations,
        checkpoint_interval: 0,
        seed,
        sampler: SamplerConfig {
            budget: 64,
            ..SamplerConfig::default()
        },
        ..SearchConfig::default()
    };

    use automr_core::ReasoningBackend;
    let start = std::time::Instant::now();
    let (_, curve) = train(&dataset, &config, &backend, &catalog, dims, &mut NullSink)
        .expect("training succeeds");
    let elapsed = start.elapsed();

    for point in &curve.points {
        if point.iteration <= 3 || point.iteration % 25 == 0 {
            println!(
                "iter {:4}  mean_reward {:+.3}  nodes {:.2}  tokens {:.1}  |g| {:.3} -> {:.3}",
                point.iteration,
                point.mean_reward,
                point.mean_nodes,
                point.mean_tokens,
                point.grad_norm_pre,
                point.grad_norm_post
            );
        }
    }
    println!(
        "eta={eta} iters={iterations} seed={seed} h={hidden}: first={:+.3} trailing20={:+.3} elapsed={:.1}s",
        curve.points.first().map(|p| p.mean_reward).unwrap_or(0.0),
        curve.trailing_mean_reward(20),
        elapsed.as_secs_f64()
    );
}
