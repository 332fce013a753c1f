//! Benchmark loop: send each prompt to every candidate chat endpoint, score
//! the responses with a [`RelevanceModel`], and report per-model mean and
//! variance.
//!
//! Collection runs with bounded concurrency; scoring and aggregation run
//! afterwards and are pure, so the report depends only on the collected
//! responses and the scorer.

pub mod cache;
pub mod client;
pub mod prompts;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, CachedResponse, ResponseCache};
pub use client::{
    load_endpoints, parse_endpoints, AttemptError, ChatClient, ChatCompletionsClient,
    ModelEndpoint, RequestParams,
};
pub use prompts::{load_prompts, parse_prompts, sample_prompts, Prompt, PromptSet, PromptSource};

use crate::error::{Error, Result};
use crate::hashing;
use crate::par::{self, Exec};
use crate::scorer::{artifact_hash, RelevanceModel};

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    /// Σ(s−mean)²/n.
    #[default]
    Population,
    /// Σ(s−mean)²/(n−1); zero for a single score.
    Sample,
}

impl std::str::FromStr for VarianceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "population" => Ok(Self::Population),
            "sample" => Ok(Self::Sample),
            _ => Err(Error::Config(format!(
                "unknown variance kind {s:?} (expected population or sample)"
            ))),
        }
    }
}

/// Result of querying one endpoint with one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub prompt_id: String,
    pub response: std::result::Result<String, String>,
    /// Network attempts made; zero on a cache hit.
    pub attempts: u32,
    pub cache_hit: bool,
}

/// Queries one endpoint, consulting the cache first. Failures after all
/// retries come back as an `Err` response, never as an error of this call.
pub fn query_model(
    client: &dyn ChatClient,
    endpoint: &ModelEndpoint,
    prompt: &Prompt,
    cache: Option<&ResponseCache>,
) -> QueryOutcome {
    let key = cache_key(&endpoint.name, &prompt.text, &endpoint.params);
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        return QueryOutcome {
            prompt_id: prompt.id.clone(),
            response: Ok(hit.text),
            attempts: 0,
            cache_hit: true,
        };
    }
    let max_attempts = endpoint.params.retries.saturating_add(1);
    let mut last_err = String::new();
    for attempt in 1..=max_attempts {
        match client.complete(endpoint, &prompt.text) {
            Ok(text) => {
                if let Some(c) = cache {
                    let entry = CachedResponse {
                        model: endpoint.name.clone(),
                        prompt_id: prompt.id.clone(),
                        text: text.clone(),
                    };
                    if let Err(e) = c.put(&key, &entry) {
                        log::warn!("could not cache response for {}/{}: {e}", endpoint.name, prompt.id);
                    }
                }
                return QueryOutcome {
                    prompt_id: prompt.id.clone(),
                    response: Ok(text),
                    attempts: attempt,
                    cache_hit: false,
                };
            }
            Err(AttemptError(msg)) => {
                log::debug!(
                    "{} / {}: attempt {attempt}/{max_attempts} failed: {msg}",
                    endpoint.name,
                    prompt.id
                );
                last_err = msg;
                if attempt < max_attempts && endpoint.retry_backoff_ms > 0 {
                    std::thread::sleep(Duration::from_millis(
                        endpoint.retry_backoff_ms * u64::from(attempt),
                    ));
                }
            }
        }
    }
    log::warn!(
        "{} / {}: giving up after {max_attempts} attempts: {last_err}",
        endpoint.name,
        prompt.id
    );
    QueryOutcome {
        prompt_id: prompt.id.clone(),
        response: Err(last_err),
        attempts: max_attempts,
        cache_hit: false,
    }
}

/// Two-pass mean and variance.
pub fn aggregate(scores: &[f64], kind: VarianceKind) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
    let var = match kind {
        VarianceKind::Population => ss / n,
        VarianceKind::Sample if scores.len() > 1 => ss / (n - 1.0),
        VarianceKind::Sample => 0.0,
    };
    Ok((mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    /// Maximum in-flight requests across all endpoints.
    pub concurrency: usize,
    pub variance: VarianceKind,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            concurrency: DEFAULT_CONCURRENCY,
            variance: VarianceKind::Population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptScore {
    pub prompt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    /// `None` when every prompt failed.
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub scored: usize,
    pub failures: usize,
    pub scores: Vec<PromptScore>,
}

impl ModelResult {
    pub fn successful_scores(&self) -> Vec<f64> {
        self.scores.iter().filter_map(|s| s.score).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointMeta {
    pub name: String,
    pub model: String,
    pub params: RequestParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub scorer_hash: String,
    pub prompt_set_hash: String,
    pub prompt_count: usize,
    pub variance: VarianceKind,
    pub endpoints: Vec<EndpointMeta>,
}

/// The report body. Run timestamps live in the run manifest so that reruns
/// over a warm cache serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub metadata: BenchMetadata,
    pub models: Vec<ModelResult>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub requests: usize,
    pub cache_hits: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub stats: RunStats,
}

pub fn prompt_set_hash(prompts: &[Prompt]) -> String {
    let v = serde_json::to_value(prompts).expect("prompts serialize");
    hashing::json_hash(&v)
}

/// Queries every `(endpoint, prompt)` pair, then scores and aggregates.
pub fn run_benchmark(
    endpoints: &[ModelEndpoint],
    prompts: &[Prompt],
    model: &RelevanceModel,
    cache: Option<&ResponseCache>,
    client: &dyn ChatClient,
    cfg: &BenchConfig,
) -> Result<BenchmarkRun> {
    if endpoints.is_empty() {
        return Err(Error::Empty("endpoints"));
    }
    if prompts.is_empty() {
        return Err(Error::Empty("prompts"));
    }
    if cfg.concurrency == 0 {
        return Err(Error::Config("concurrency must be at least 1".into()));
    }
    for ep in endpoints {
        ep.validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..endpoints.len())
        .flat_map(|e| (0..prompts.len()).map(move |p| (e, p)))
        .collect();
    let slots: Vec<Mutex<Option<QueryOutcome>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.concurrency.min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(e, p)) = jobs.get(j) else { break };
                let out = query_model(client, &endpoints[e], &prompts[p], cache);
                *slots[j].lock().expect("slot lock") = Some(out);
            });
        }
    });
    let outcomes: Vec<QueryOutcome> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect();

    let mut stats = RunStats::default();
    for o in &outcomes {
        stats.requests += o.attempts as usize;
        stats.cache_hits += usize::from(o.cache_hit);
        stats.failures += usize::from(o.response.is_err());
    }

    let scores: Vec<Option<f64>> = par::map_indexed(Exec::default(), &outcomes, |_, o| {
        o.response.as_ref().ok().map(|t| model.predict_score(t))
    });

    let mut models = Vec::with_capacity(endpoints.len());
    for (e, ep) in endpoints.iter().enumerate() {
        let range = e * prompts.len()..(e + 1) * prompts.len();
        let per_prompt: Vec<PromptScore> = outcomes[range.clone()]
            .iter()
            .zip(&scores[range])
            .map(|(o, s)| PromptScore {
                prompt_id: o.prompt_id.clone(),
                score: *s,
                error: o.response.as_ref().err().cloned(),
            })
            .collect();
        let ok: Vec<f64> = per_prompt.iter().filter_map(|p| p.score).collect();
        let failures = per_prompt.len() - ok.len();
        let (mean, variance) = match aggregate(&ok, cfg.variance) {
            Ok((m, v)) => (Some(m), Some(v)),
            Err(_) => {
                log::error!("{}: all {} prompts failed", ep.name, per_prompt.len());
                (None, None)
            }
        };
        models.push(ModelResult {
            name: ep.name.clone(),
            mean,
            variance,
            scored: ok.len(),
            failures,
            scores: per_prompt,
        });
    }

    let metadata = BenchMetadata {
        scorer_hash: artifact_hash(model)?,
        prompt_set_hash: prompt_set_hash(prompts),
        prompt_count: prompts.len(),
        variance: cfg.variance,
        endpoints: endpoints
            .iter()
            .map(|ep| EndpointMeta {
                name: ep.name.clone(),
                model: ep.wire_model().to_string(),
                params: ep.params.clone(),
            })
            .collect(),
    };
    Ok(BenchmarkRun {
        report: BenchmarkReport { metadata, models },
        stats,
    })
}

impl BenchmarkReport {
    /// Aligned listing: one row per model with mean and variance.
    pub fn render_table(&self) -> String {
        let width = self
            .models
            .iter()
            .map(|m| m.name.chars().count())
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let var_head = match self.metadata.variance {
            VarianceKind::Population => "Variance",
            VarianceKind::Sample => "Variance (sample)",
        };
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>17}  {:>6}  {:>8}", "Model", "Mean", var_head, "Scored", "Failures");
        for m in &self.models {
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>17}  {:>6}  {:>8}",
                m.name,
                fmt(m.mean),
                fmt(m.variance),
                m.scored,
                m.failures
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
