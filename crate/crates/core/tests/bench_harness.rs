mod common;

use common::mock_server::{Behavior, MockServer};
use relscore_core::bench::{
    query_model, run_benchmark, BenchConfig, ChatCompletionsClient, ModelEndpoint, Prompt,
    PromptSource, ResponseCache,
};
use relscore_core::features::FeatureConfig;
use relscore_core::scorer::{ClassSpec, RelevanceModel, Variant};

fn prompts(n: usize) -> Vec<Prompt> {
    (0..n)
        .map(|i| Prompt {
            id: format!("q{i}"),
            text: format!("Describe item number {i}."),
            source: PromptSource::Authored,
        })
        .collect()
}

fn endpoint(server: &MockServer, route: &str, retries: u32) -> ModelEndpoint {
    let mut ep = ModelEndpoint::new(route, server.base_url(route));
    ep.params.retries = retries;
    ep.params.timeout_secs = 5;
    ep.retry_backoff_ms = 1;
    ep
}

fn scorer() -> RelevanceModel {
    let cfg = FeatureConfig {
        hash_dim: 128,
        ..FeatureConfig::default()
    };
    let mut m = RelevanceModel::zeros(Variant::A, cfg, &ClassSpec { labels: vec![], class_scores: vec![] }).unwrap();
    for (i, w) in m.regression_weights.iter_mut().enumerate() {
        *w = ((i * 7919) % 13) as f64 / 6.0 - 1.0;
    }
    m
}

#[test]
fn fixed_text_is_recorded() {
    let server = MockServer::start(vec![("m", Behavior::Fixed("hello there".into()))]);
    let out = query_model(&ChatCompletionsClient, &endpoint(&server, "m", 0), &prompts(1)[0], None);
    assert_eq!(out.response.as_deref(), Ok("hello there"));
    let seen = server.seen();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].body["messages"][0]["content"], "Describe item number 0.");
    assert_eq!(seen[0].body["temperature"], 0.0);
}

#[test]
fn succeeds_on_third_attempt() {
    let server = MockServer::start(vec![(
        "flaky",
        Behavior::FailFirst(2, Box::new(Behavior::Fixed("finally".into()))),
    )]);
    let out = query_model(&ChatCompletionsClient, &endpoint(&server, "flaky", 3), &prompts(1)[0], None);
    assert_eq!(out.response.as_deref(), Ok("finally"));
    assert_eq!(out.attempts, 3);
    assert_eq!(server.requests(), 3);
}

#[test]
fn failing_model_does_not_stop_the_run() {
    let server = MockServer::start(vec![
        ("up", Behavior::Echo("reply".into())),
        ("down", Behavior::Down),
    ]);
    let eps = vec![endpoint(&server, "up", 0), endpoint(&server, "down", 1)];
    let run = run_benchmark(&eps, &prompts(3), &scorer(), None, &ChatCompletionsClient, &BenchConfig::default()).unwrap();
    let [up, down] = &run.report.models[..] else { panic!("two rows expected") };
    assert_eq!(up.scores.len(), 3);
    assert_eq!(up.failures, 0);
    assert!(up.mean.is_some());
    assert_eq!(down.failures, 3);
    assert_eq!(down.mean, None);
    assert!(down.scores.iter().all(|s| s.error.as_deref().unwrap().contains("500")));
    assert_eq!(server.requests(), 3 + 3 * 2);
}

#[test]
fn api_key_comes_from_environment_and_never_reaches_the_report() {
    let server = MockServer::start(vec![("m", Behavior::Fixed("ok".into()))]);
    let var = "RELSCORE_TEST_KEY_HARNESS";
    std::env::set_var(var, "sk-test-secret");
    let mut ep = endpoint(&server, "m", 0);
    ep.api_key_env = Some(var.into());
    let run = run_benchmark(&[ep], &prompts(2), &scorer(), None, &ChatCompletionsClient, &BenchConfig::default()).unwrap();
    let seen = server.seen();
    assert!(seen.iter().all(|r| r.authorization.as_deref() == Some("Bearer sk-test-secret")));
    assert!(!run.report.to_json().unwrap().contains("sk-test-secret"));

    let mut missing = endpoint(&server, "m", 0);
    missing.api_key_env = Some("RELSCORE_TEST_KEY_UNSET".into());
    let out = query_model(&ChatCompletionsClient, &missing, &prompts(1)[0], None);
    assert!(out.response.unwrap_err().contains("RELSCORE_TEST_KEY_UNSET"));
}

#[test]
fn warm_cache_survives_unreachable_network() {
    let cache_dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(cache_dir.path()).unwrap();
    let ps = prompts(5);
    let (cold, dead_url) = {
        let server = MockServer::start(vec![
            ("a", Behavior::Echo("alpha".into())),
            ("b", Behavior::Echo("beta".into())),
        ]);
        let eps = vec![endpoint(&server, "a", 0), endpoint(&server, "b", 0)];
        let run = run_benchmark(&eps, &ps, &scorer(), Some(&cache), &ChatCompletionsClient, &BenchConfig::default()).unwrap();
        assert_eq!(server.requests(), 10);
        (run, server.base_url("a"))
    };
    // The server is gone; point both endpoints at its dead address.
    let eps: Vec<ModelEndpoint> = ["a", "b"]
        .iter()
        .map(|n| {
            let mut ep = ModelEndpoint::new(*n, dead_url.clone());
            ep.params.retries = 0;
            ep.params.timeout_secs = 5;
            ep
        })
        .collect();
    let warm = run_benchmark(&eps, &ps, &scorer(), Some(&cache), &ChatCompletionsClient, &BenchConfig::default()).unwrap();
    assert_eq!(warm.stats.requests, 0);
    assert_eq!(warm.stats.cache_hits, 10);
    assert_eq!(cold.report.to_json().unwrap(), warm.report.to_json().unwrap());
}

#[test]
fn changed_params_miss_the_cache() {
    let server = MockServer::start(vec![("m", Behavior::Fixed("x".into()))]);
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let p = &prompts(1)[0];
    let mut ep = endpoint(&server, "m", 0);
    query_model(&ChatCompletionsClient, &ep, p, Some(&cache));
    query_model(&ChatCompletionsClient, &ep, p, Some(&cache));
    assert_eq!(server.requests(), 1);
    ep.params.temperature = 0.5;
    query_model(&ChatCompletionsClient, &ep, p, Some(&cache));
    assert_eq!(server.requests(), 2);
}
