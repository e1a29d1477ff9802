//! `automr` command line: train, eval, sample, replay, gradcheck,
//! export-dot, rs-baseline.

mod config;
mod dataset;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use automr_core::{
    deserialize_checkpoint, evaluate, forced_replay, gradient_check, random_search_baseline,
    sample_skeleton, serialize_checkpoint, search::stream_seed, train, DatasetRecord, DirSink,
    PolicyDims, PolicyParameters, Skeleton, SkeletonTrace, RS_DEFAULT_CANDIDATES,
};
use config::{BackendKind, RunConfig};

#[derive(Parser)]
#[command(name = "automr", about = "Query-aware meta-reasoning skeleton search", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (flat key=value lines, e.g. search.N=8)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master random seed (overrides the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Reasoning backend: mock | scripted | http
    #[arg(long)]
    backend: Option<String>,
    /// Token budget for generated step contents
    #[arg(long)]
    budget: Option<usize>,
    /// Number of training iterations
    #[arg(long)]
    iterations: Option<usize>,
    /// Output directory for checkpoints, curves, and traces
    #[arg(long)]
    out: Option<String>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(backend) = &self.backend {
            config.backend = backend.parse::<BackendKind>()?;
        }
        if let Some(budget) = self.budget {
            config.search.sampler.budget = budget;
        }
        if let Some(iterations) = self.iterations {
            config.search.iterations = iterations;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        config.search.seed = config.seed;
        config.search.sampler.seed = config.seed;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the REINFORCE search and write checkpoints plus a learning curve.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Training dataset (JSONL); scripted backend generates one if omitted
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: accuracy plus per-query trace files.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Policy checkpoint to evaluate
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Sample one episode for a query and print its trace document.
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        query: String,
        /// Policy checkpoint (default: fresh seeded initialization)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Force-replay a skeleton structure from a trace document.
    Replay {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace document holding the structure to reproduce
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, default_value = "replayed query")]
        query: String,
        /// Policy checkpoint scoring the forced choices (default: uniform)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Random coordinates per parameter block (5 blocks)
        #[arg(long, default_value_t = 40)]
        coords_per_block: usize,
    },
    /// Render a skeleton trace document as DOT.
    ExportDot {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        structure: PathBuf,
    },
    /// Random-search baseline over uniformly sampled structures.
    RsBaseline {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = RS_DEFAULT_CANDIDATES)]
        candidates: usize,
    },
}

/// Flag path, then config path, then a generated scripted dataset.
fn resolve_dataset(
    config: &RunConfig,
    flag: Option<&Path>,
    eval_split: bool,
) -> Result<Vec<DatasetRecord>> {
    let configured = if eval_split {
        config.dataset_eval.as_ref().or(config.dataset_train.as_ref())
    } else {
        config.dataset_train.as_ref()
    };
    if let Some(path) = flag {
        return dataset::load_dataset(path);
    }
    if let Some(path) = configured {
        return dataset::load_dataset(Path::new(path));
    }
    if config.backend == BackendKind::Scripted {
        return Ok(automr_core::backend::scripted_dataset(
            &config.scripted,
            config.scripted_queries,
        ));
    }
    bail!("no dataset: pass --data or set dataset.train in the config")
}

fn load_params(path: &Path) -> Result<PolicyParameters> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    Ok(deserialize_checkpoint(&bytes)?)
}

fn read_structure(path: &Path) -> Result<Skeleton> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read structure {}", path.display()))?;
    let trace = SkeletonTrace::from_json(&text)?;
    Ok(Skeleton::from_trace(&trace)?)
}

fn cmd_train(common: &CommonArgs, data: Option<&Path>) -> Result<()> {
    let config = common.resolve()?;
    let backend = config.build_backend()?;
    let records = resolve_dataset(&config, data, false)?;
    let catalog = config.load_catalog()?;
    let dims = config.policy_dims(backend.as_ref());

    std::fs::create_dir_all(&config.out_dir)?;
    let mut sink = DirSink::new(&config.out_dir);
    let (params, curve) = train(
        &records,
        &config.search,
        backend.as_ref(),
        &catalog,
        dims,
        &mut sink,
    )?;

    let checkpoint_path = Path::new(&config.out_dir).join("checkpoint-final.json");
    std::fs::write(&checkpoint_path, serialize_checkpoint(&params))?;
    let curve_path = Path::new(&config.out_dir).join("curve.jsonl");
    std::fs::write(&curve_path, curve.to_jsonl())?;

    println!(
        "trained {} iterations on {} records; final 20-iteration mean reward = {:+.3}",
        config.search.iterations,
        records.len(),
        curve.trailing_mean_reward(20),
    );
    println!("checkpoint: {}", checkpoint_path.display());
    println!("curve: {}", curve_path.display());
    Ok(())
}

fn cmd_eval(common: &CommonArgs, data: Option<&Path>, checkpoint: &Path) -> Result<()> {
    let config = common.resolve()?;
    let backend = config.build_backend()?;
    let records = resolve_dataset(&config, data, true)?;
    let catalog = config.load_catalog()?;
    let params = load_params(checkpoint)?;

    let report = evaluate(&records, &params, backend.as_ref(), &catalog, &config.search)?;
    std::fs::create_dir_all(&config.out_dir)?;
    for (index, trace) in report.traces.iter().enumerate() {
        let path = Path::new(&config.out_dir).join(format!("trace-{index:04}.json"));
        std::fs::write(path, trace.to_document().to_json())?;
    }
    println!("accuracy = {:.4}", report.accuracy);
    println!("traces: {}/trace-*.json", config.out_dir);
    Ok(())
}

fn cmd_sample(common: &CommonArgs, query: &str, checkpoint: Option<&Path>) -> Result<()> {
    let config = common.resolve()?;
    let backend = config.build_backend()?;
    let catalog = config.load_catalog()?;
    let params = match checkpoint {
        Some(path) => load_params(path)?,
        None => PolicyParameters::init(
            config.policy_dims(backend.as_ref()),
            stream_seed(config.seed, "init"),
        )?,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(config.seed, "sample"));
    let trace = sample_skeleton(
        query,
        &params,
        backend.as_ref(),
        &catalog,
        &config.search.sampler,
        &mut rng,
    )?;
    println!("{}", trace.to_document().to_json());
    Ok(())
}

fn cmd_replay(
    common: &CommonArgs,
    structure: &Path,
    query: &str,
    checkpoint: Option<&Path>,
) -> Result<()> {
    let config = common.resolve()?;
    let backend = config.build_backend()?;
    let catalog = config.load_catalog()?;
    let skeleton = read_structure(structure)?;
    let params = match checkpoint {
        Some(path) => load_params(path)?,
        None => PolicyParameters::zeros(config.policy_dims(backend.as_ref()))?,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(config.seed, "replay"));
    let (trace, mlp_calls) = forced_replay(
        &skeleton,
        query,
        &params,
        backend.as_ref(),
        &catalog,
        &config.search.sampler,
        &mut rng,
    )?;
    println!("{}", trace.to_document().to_json());
    eprintln!("mlp_calls = {mlp_calls}");
    Ok(())
}

fn cmd_gradcheck(common: &CommonArgs, coords_per_block: usize) -> Result<()> {
    let config = common.resolve()?;
    let dims = PolicyDims::new(16, 8, 32);
    let report = gradient_check(dims, config.seed, coords_per_block)?;
    println!(
        "checked {} coordinates; max relative error = {:.3e}",
        report.coords_checked, report.max_relative_error
    );
    if report.max_relative_error > 1e-4 {
        bail!(
            "gradient check failed: max relative error {} exceeds 1e-4",
            report.max_relative_error
        );
    }
    Ok(())
}

fn cmd_export_dot(common: &CommonArgs, structure: &Path) -> Result<()> {
    let config = common.resolve()?;
    let skeleton = read_structure(structure)?;
    let dot = skeleton.export_dot()?;
    match &common.out {
        Some(_) => {
            std::fs::create_dir_all(&config.out_dir)?;
            let path = Path::new(&config.out_dir).join("skeleton.dot");
            std::fs::write(&path, &dot)?;
            println!("{}", path.display());
        }
        None => print!("{dot}"),
    }
    Ok(())
}

fn cmd_rs_baseline(common: &CommonArgs, data: Option<&Path>, candidates: usize) -> Result<()> {
    let config = common.resolve()?;
    let backend = config.build_backend()?;
    let records = resolve_dataset(&config, data, false)?;
    let catalog = config.load_catalog()?;
    let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(config.seed, "rs"));
    let (structure, accuracy) = random_search_baseline(
        &records,
        backend.as_ref(),
        &catalog,
        candidates,
        &config.search,
        &mut rng,
    )?;
    std::fs::create_dir_all(&config.out_dir)?;
    let path = Path::new(&config.out_dir).join("rs-structure.json");
    std::fs::write(&path, structure.to_trace().to_json())?;
    println!(
        "best of {candidates} candidates: training accuracy = {accuracy:.4} ({} nodes, {} edges)",
        structure.node_count(),
        structure.edges.len()
    );
    println!("structure: {}", path.display());
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { common, data } => cmd_train(common, data.as_deref()),
        Command::Eval {
            common,
            data,
            checkpoint,
        } => cmd_eval(common, data.as_deref(), checkpoint),
        Command::Sample {
            common,
            query,
            checkpoint,
        } => cmd_sample(common, query, checkpoint.as_deref()),
        Command::Replay {
            common,
            structure,
            query,
            checkpoint,
        } => cmd_replay(common, structure, query, checkpoint.as_deref()),
        Command::Gradcheck {
            common,
            coords_per_block,
        } => cmd_gradcheck(common, *coords_per_block),
        Command::ExportDot { common, structure } => cmd_export_dot(common, structure),
        Command::RsBaseline {
            common,
            data,
            candidates,
        } => cmd_rs_baseline(common, data.as_deref(), *candidates),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
