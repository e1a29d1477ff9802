//! Flat `key=value` run configuration with section prefixes
//! (`search.N=8`, `sampler.budget=1024`). Command-line flags override file
//! values; file values override the built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use automr_core::{
    AnswerMatcher, HttpBackendConfig, MockBackend, PolicyDims, ReasoningBackend, ScriptedBackend,
    ScriptedEnvSpec, SearchConfig, Strategy, StrategyCatalog, TaskKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Scripted,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "scripted" => Ok(BackendKind::Scripted),
            "http" => Ok(BackendKind::Http),
            other => bail!("unknown backend {other:?} (expected mock|scripted|http)"),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    pub backend: BackendKind,
    pub backend_d_c: Option<usize>,
    pub http: HttpBackendConfig,
    pub scripted: ScriptedEnvSpec,
    pub scripted_queries: usize,
    pub dataset_train: Option<String>,
    pub dataset_eval: Option<String>,
    pub catalog_path: Option<String>,
    pub search: SearchConfig,
    pub d_s: usize,
    pub hidden: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: "out".into(),
            backend: BackendKind::Mock,
            backend_d_c: None,
            http: HttpBackendConfig::default(),
            scripted: ScriptedEnvSpec::default(),
            scripted_queries: 16,
            dataset_train: None,
            dataset_eval: None,
            catalog_path: None,
            search: SearchConfig::default(),
            d_s: PolicyDims::default().d_s,
            hidden: PolicyDims::default().hidden,
        }
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("config line {}: expected key=value, got {raw:?}", number + 1))?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut config = RunConfig::default();
        for (key, value) in &pairs {
            config
                .apply(key, value)
                .with_context(|| format!("config key {key}"))?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = value.parse()?,
            "out" => self.out_dir = value.to_string(),
            "backend" => self.backend = value.parse()?,
            "backend.d_c" => self.backend_d_c = Some(value.parse()?),
            "backend.base_url" => self.http.base_url = value.to_string(),
            "backend.model" => self.http.model = value.to_string(),
            "backend.embeddings_model" => self.http.embeddings_model = Some(value.to_string()),
            "backend.temperature" => self.http.temperature = value.parse()?,
            "backend.max_in_flight" => self.http.max_in_flight = value.parse()?,
            "backend.target" => self.scripted.target_strategy = value.parse::<Strategy>()?,
            "backend.step_tokens" => self.scripted.step_tokens = value.parse()?,
            "scripted.queries" => self.scripted_queries = value.parse()?,
            "dataset.train" => self.dataset_train = Some(value.to_string()),
            "dataset.eval" => self.dataset_eval = Some(value.to_string()),
            "catalog" => self.catalog_path = Some(value.to_string()),
            "search.N" => self.search.queries_per_batch = value.parse()?,
            "search.M" => self.search.samples_per_query = value.parse()?,
            "search.eta" => self.search.learning_rate = value.parse()?,
            "search.clip_norm" => self.search.clip_norm = value.parse()?,
            "search.iterations" => self.search.iterations = value.parse()?,
            "search.checkpoint_interval" => self.search.checkpoint_interval = value.parse()?,
            "search.baseline" => self.search.use_mean_baseline = value.parse()?,
            "search.greedy_eval" => self.search.greedy_eval = value.parse()?,
            "search.matcher" => {
                self.search.matcher = match value {
                    "normalized" => AnswerMatcher::Normalized,
                    "extracted" => AnswerMatcher::Extracted,
                    other => bail!("unknown matcher {other:?} (expected normalized|extracted)"),
                }
            }
            "sampler.budget" => self.search.sampler.budget = value.parse()?,
            "sampler.max_nodes" => self.search.sampler.max_nodes = value.parse()?,
            "sampler.include_termination" => {
                self.search.sampler.include_termination_in_logprob = value.parse()?
            }
            "sampler.condition_on_zero" => self.search.sampler.condition_on_zero = value.parse()?,
            "sampler.answer_max_tokens" => self.search.sampler.answer_max_tokens = value.parse()?,
            "sampler.max_step_tokens" => {
                self.search.sampler.max_step_tokens = Some(value.parse()?)
            }
            "sampler.task" => self.search.sampler.task = value.parse::<TaskKind>()?,
            "policy.d_s" => self.d_s = value.parse()?,
            "policy.h" => self.hidden = value.parse()?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Builds the configured backend.
    pub fn build_backend(&self) -> Result<Box<dyn ReasoningBackend>> {
        Ok(match self.backend {
            BackendKind::Mock => Box::new(MockBackend::new(self.backend_d_c.unwrap_or(64))),
            BackendKind::Scripted => {
                let mut spec = self.scripted.clone();
                if let Some(d_c) = self.backend_d_c {
                    spec.embedding_dim = d_c;
                }
                Box::new(ScriptedBackend::new(spec)?)
            }
            BackendKind::Http => {
                let mut http = self.http.clone();
                if let Some(d_c) = self.backend_d_c {
                    http.embedding_dim = d_c;
                }
                Box::new(automr_core::HttpBackend::new(http)?)
            }
        })
    }

    pub fn policy_dims(&self, backend: &dyn ReasoningBackend) -> PolicyDims {
        PolicyDims::new(backend.contract().embedding_dim, self.d_s, self.hidden)
    }

    /// Built-in prompt catalog, or the JSON override named by `catalog=`.
    pub fn load_catalog(&self) -> Result<StrategyCatalog> {
        match &self.catalog_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read catalog {path}"))?;
                Ok(StrategyCatalog::from_json(&text)?)
            }
            None => Ok(StrategyCatalog::builtin()),
        }
    }
}
