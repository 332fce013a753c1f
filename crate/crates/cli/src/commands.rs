use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use relscore_core::bench::{
    load_endpoints, load_prompts, run_benchmark, sample_prompts, BenchConfig,
    ChatCompletionsClient, ResponseCache, VarianceKind, DEFAULT_CONCURRENCY,
};
use relscore_core::beta_diffusion::{
    beta_moments, diffuse_corpus, fit_beta_params, DiffusionConfig, DEFAULT_SEED,
};
use relscore_core::dataset::{
    export, ingest, map_corpus, read_scored, split, stratify, BucketCaps,
};
use relscore_core::evaluation::{
    build_anchors, evaluate_baseline, evaluate_model, DEFAULT_CLASS_THRESHOLD, DEFAULT_TOLERANCES,
};
use relscore_core::features::FeatureConfig;
use relscore_core::hashing::{file_sha256, json_hash, unix_now};
use relscore_core::relevance_map::{
    adjust_boundaries, load_mapping, BoundaryPolicy, MappingTable,
};
use relscore_core::scorer::{load_model, save_model, train, ClassSpec, TrainConfig, Variant};

use crate::config::{CapsMode, FileConfig};
use crate::{
    BenchArgs, BuildDatasetArgs, Cli, Command, DiffusionArgs, EvalArgs, InspectArgs, MappingArgs,
    TrainArgs,
};

const DEFAULT_RELEVANT_LABEL: &str = "Government Affairs";
const DEFAULT_OTHER_LABEL: &str = "Others";

pub fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed);
    match cli.command {
        Command::BuildDataset(a) => build_dataset(a, &file, seed),
        Command::Train(a) => train_cmd(a, &file, seed),
        Command::Eval(a) => eval_cmd(a, &file),
        Command::Bench(a) => bench_cmd(a, &file),
        Command::Inspect(a) => inspect(a, &file),
    }
}

/// Per-run record of resolved configuration and input/output hashes.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: serde_json::Value,
    config_hash: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    created_unix: u64,
}

fn hashes(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), file_sha256(p)?)))
        .collect()
}

fn write_manifest(
    path: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let m = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: json_hash(&config),
        config,
        inputs: hashes(inputs)?,
        outputs: hashes(outputs)?,
        created_unix: unix_now(),
    };
    let mut body = serde_json::to_string_pretty(&m)?;
    body.push('\n');
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn resolve_mapping(args: &MappingArgs, file: &FileConfig) -> Result<(MappingTable, Option<PathBuf>)> {
    match args.mapping.clone().or_else(|| file.mapping.clone()) {
        Some(p) => {
            let t = load_mapping(&p).with_context(|| format!("loading mapping {}", p.display()))?;
            Ok((t, Some(p)))
        }
        None => Ok((MappingTable::default_table(), None)),
    }
}

fn resolve_policy(file: &FileConfig) -> Result<BoundaryPolicy> {
    Ok(match &file.boundary_rules {
        Some(rules) => BoundaryPolicy::new(rules.clone())?,
        None => BoundaryPolicy::default(),
    })
}

fn resolve_diffusion(args: &DiffusionArgs, file: &FileConfig, seed: Option<u64>) -> Result<DiffusionConfig> {
    let mut cfg = file.diffusion.unwrap_or_default();
    if let Some(c) = args.concentration {
        cfg.concentration = c;
    }
    if let Some(i) = args.increment {
        cfg.increment = i;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_dataset(a: BuildDatasetArgs, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let (table, mapping_path) = resolve_mapping(&a.mapping, file)?;
    let policy = resolve_policy(file)?;
    let diffusion = resolve_diffusion(&a.diffusion, file, seed)?;
    let width = a.interval_width.or(file.dataset.interval_width).unwrap_or(0.1);
    let caps_mode = a.caps.or(file.dataset.caps).unwrap_or_default();
    let mut spec = file.split.unwrap_or_default();
    if let Some(w) = &a.split {
        (spec.train_weight, spec.eval_weight, spec.test_weight) = (w[0], w[1], w[2]);
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let run_seed = seed.unwrap_or(DEFAULT_SEED);

    let ingested = ingest(&a.corpus).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    if ingested.skipped_empty > 0 {
        log::warn!("skipped {} records with empty text", ingested.skipped_empty);
    }
    let n_in = ingested.docs.len();
    let mapped = map_corpus(ingested.docs, &table, &policy)
        .with_context(|| format!("mapping labels in {}", a.corpus.display()))?;
    let caps = match caps_mode {
        CapsMode::Hints => BucketCaps::from_hints(&table, width)?,
        CapsMode::None => BucketCaps::uncapped(relscore_core::dataset::bucket_count(width)?),
    };
    let sampled = stratify(&mapped, width, &caps, run_seed)?;
    let diffused = diffuse_corpus(sampled, &diffusion)?;
    for w in &diffused.warnings {
        eprintln!(
            "warning: score {} snapped to Beta({}, {}) at the grid edge",
            w.hard_score, w.params.alpha, w.params.beta
        );
    }
    let parts = split(diffused.docs, &spec)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("corpus".to_string(), file_sha256(&a.corpus)?);
    inputs.insert(
        "mapping".to_string(),
        match &mapping_path {
            Some(p) => file_sha256(p)?,
            None => relscore_core::hashing::sha256_hex(table.to_tsv().as_bytes()),
        },
    );
    let config = json!({
        "command": "build-dataset",
        "inputs": inputs,
        "mapping_entries": table.len(),
        "boundary_rules": policy.rules(),
        "diffusion": diffusion,
        "interval_width": width,
        "caps": caps_mode,
        "split": spec,
    });
    let exported = export(&parts, &a.out, run_seed, &config)
        .with_context(|| format!("exporting to {}", a.out.display()))?;
    let [tr, ev, te] = parts.counts();
    println!(
        "{n_in} documents in, {} after stratification; train {tr}, eval {ev}, test {te}",
        tr + ev + te
    );
    println!("manifest: {}", exported.manifest_path.display());
    Ok(())
}

fn resolve_train(a: &TrainArgs, file: &FileConfig, seed: Option<u64>) -> Result<(TrainConfig, FeatureConfig)> {
    let mut t = file.train.clone().unwrap_or_default();
    if let Some(v) = a.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.max_epochs {
        t.max_epochs = v;
    }
    if let Some(v) = a.eval_interval {
        t.eval_interval_steps = v;
    }
    if let Some(v) = a.patience {
        t.early_stop_patience = v;
    }
    if let Some(s) = seed {
        t.seed = s;
    }
    t.validate()?;
    let mut f = file.features.clone().unwrap_or_default();
    if let Some(bits) = a.hash_bits {
        if !(1..=30).contains(&bits) {
            bail!("--hash-bits must be between 1 and 30");
        }
        f.hash_dim = 1 << bits;
    }
    f.validate()?;
    Ok((t, f))
}

fn train_cmd(a: TrainArgs, file: &FileConfig, seed: Option<u64>) -> Result<()> {
    let variant: Variant = a.variant.parse()?;
    let (tcfg, fcfg) = resolve_train(&a, file, seed)?;
    let (table, mapping_path) = resolve_mapping(&a.mapping, file)?;
    let policy = resolve_policy(file)?;
    let classes = ClassSpec::from_mapping(&table, &policy)?;

    if !a.dataset.is_dir() {
        bail!("dataset directory {} does not exist", a.dataset.display());
    }
    let train_path = a.dataset.join("train.jsonl");
    let eval_path = a.dataset.join("eval.jsonl");
    let train_set = read_scored(&train_path)?;
    let eval_set = read_scored(&eval_path)?;
    let (model, trace) = train(variant, &train_set, &eval_set, &tcfg, &fcfg, &classes)?;

    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.dataset.join(format!("model_{}.bin", variant.to_string().to_lowercase())));
    save_model(&model, &out).with_context(|| format!("writing {}", out.display()))?;
    let trace_path = with_suffix(&out, ".trace.json");
    std::fs::write(&trace_path, serde_json::to_string_pretty(&trace)? + "\n")
        .with_context(|| format!("writing {}", trace_path.display()))?;

    let mut inputs: Vec<&Path> = vec![&train_path, &eval_path];
    if let Some(p) = &mapping_path {
        inputs.push(p);
    }
    write_manifest(
        &with_suffix(&out, ".manifest.json"),
        "train",
        json!({"variant": variant, "train": tcfg, "features": fcfg, "classes": classes.labels.len()}),
        &inputs,
        &[&out, &trace_path],
    )?;
    println!(
        "variant {variant}: {} steps, best eval MSE {:.6} at step {}{}",
        trace.total_steps,
        trace.best_eval_mse,
        trace.best_step,
        if trace.stopped_early { " (stopped early)" } else { "" }
    );
    println!("model: {}", out.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs, file: &FileConfig) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let test = read_scored(&a.test)?;
    if test.is_empty() {
        bail!("test file {} has no records", a.test.display());
    }
    let tolerances = a
        .tolerances
        .clone()
        .or_else(|| file.eval.tolerances.clone())
        .unwrap_or_else(|| DEFAULT_TOLERANCES.to_vec());
    let report = evaluate_model(&model, &test, &tolerances)?;
    let name = a.name.clone().unwrap_or_else(|| format!("Variant {}", model.variant));
    print!("{}", report.render_table(&name));

    let mut inputs: Vec<&Path> = vec![&a.model, &a.test];
    let baseline = match &a.baseline_train {
        Some(train_path) => {
            let rel = a
                .relevant_label
                .clone()
                .or_else(|| file.eval.relevant_label.clone())
                .unwrap_or_else(|| DEFAULT_RELEVANT_LABEL.into());
            let other = a
                .other_label
                .clone()
                .or_else(|| file.eval.other_label.clone())
                .unwrap_or_else(|| DEFAULT_OTHER_LABEL.into());
            let train_set = read_scored(train_path)?;
            let anchors = build_anchors(&train_set, &model.feature_config, &rel, &other)?;
            let b = evaluate_baseline(&anchors, &test, &model.feature_config, DEFAULT_CLASS_THRESHOLD)?;
            println!(
                "Cosine-softmax baseline ({rel} vs {other}): accuracy {:.2}%, F1 {:.4}",
                b.accuracy * 100.0,
                b.f1
            );
            inputs.push(train_path);
            Some(json!({"relevant_label": rel, "other_label": other, "report": b}))
        }
        None => None,
    };

    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.model, ".eval.json"));
    let body = json!({"model": name, "report": report, "baseline": baseline});
    std::fs::write(&report_path, serde_json::to_string_pretty(&body)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    write_manifest(
        &with_suffix(&report_path, ".manifest.json"),
        "eval",
        json!({"tolerances": tolerances, "class_threshold": DEFAULT_CLASS_THRESHOLD}),
        &inputs,
        &[&report_path],
    )?;
    Ok(())
}

fn bench_cmd(a: BenchArgs, file: &FileConfig) -> Result<()> {
    let endpoints_path = a
        .endpoints
        .clone()
        .or_else(|| file.bench.endpoints.clone())
        .context("no endpoint file given (--endpoints or [bench].endpoints)")?;
    let endpoints = load_endpoints(&endpoints_path)?;
    let prompts_path = a.prompts.clone().or_else(|| file.bench.prompts.clone());
    let prompt_set = match &prompts_path {
        Some(p) => load_prompts(p)?,
        None => sample_prompts(),
    };
    for w in &prompt_set.warnings {
        eprintln!("warning: {w}");
    }
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let variance: VarianceKind = match a.variance.clone().or_else(|| file.bench.variance.clone()) {
        Some(v) => v.parse()?,
        None => VarianceKind::default(),
    };
    let cfg = BenchConfig {
        concurrency: a.concurrency.or(file.bench.concurrency).unwrap_or(DEFAULT_CONCURRENCY),
        variance,
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let cache_dir = a
        .cache_dir
        .clone()
        .or_else(|| file.bench.cache_dir.clone())
        .unwrap_or_else(|| a.out.join("cache"));
    let cache = ResponseCache::open(&cache_dir)?;

    let run = run_benchmark(&endpoints, &prompt_set.prompts, &model, Some(&cache), &ChatCompletionsClient, &cfg)?;
    print!("{}", run.report.render_table());
    let report_path = a.out.join("bench_report.json");
    run.report.write_json(&report_path)?;

    let mut inputs: Vec<&Path> = vec![&endpoints_path, &a.model];
    if let Some(p) = &prompts_path {
        inputs.push(p);
    }
    write_manifest(
        &a.out.join("run_manifest.json"),
        "bench",
        json!({
            "concurrency": cfg.concurrency,
            "variance": cfg.variance,
            "cache_dir": cache_dir,
            "requests": run.stats.requests,
            "cache_hits": run.stats.cache_hits,
            "failures": run.stats.failures,
        }),
        &inputs,
        &[&report_path],
    )?;
    eprintln!(
        "{} requests, {} cache hits, {} failed prompts",
        run.stats.requests, run.stats.cache_hits, run.stats.failures
    );
    if run.report.models.iter().all(|m| m.mean.is_none()) {
        bail!("every model failed on every prompt");
    }
    Ok(())
}

fn inspect(a: InspectArgs, file: &FileConfig) -> Result<()> {
    let (table, _) = resolve_mapping(&a.mapping, file)?;
    let policy = resolve_policy(file)?;
    let cfg = resolve_diffusion(&a.diffusion, file, None)?;
    let label_w = table.labels().map(|l| l.chars().count()).max().unwrap_or(5).max(5);
    println!(
        "{:<label_w$}  {:>5}  {:>8}  {:>5}  {:>5}  {:>7}  {:>9}",
        "Label", "Hard", "Adjusted", "Alpha", "Beta", "Mean", "Variance"
    );
    for e in table.entries() {
        let adj = adjust_boundaries(e.hard_score, &policy)?;
        let fit = fit_beta_params(adj, &cfg)?;
        let (mean, var) = beta_moments(fit.params);
        println!(
            "{:<label_w$}  {:>5.2}  {:>8.2}  {:>5.1}  {:>5.1}  {:>7.4}  {:>9.6}{}",
            e.label,
            e.hard_score,
            adj,
            fit.params.alpha,
            fit.params.beta,
            mean,
            var,
            if fit.clamped { "  (clamped)" } else { "" }
        );
    }
    println!();
    println!(
        "Variance over grid means (alpha + beta = {}, closed form h(1-h)/{}):",
        cfg.concentration,
        cfg.concentration + 1.0
    );
    println!("{:>6}  {:>5}  {:>5}  {:>10}", "Mean", "Alpha", "Beta", "Variance");
    for h in cfg.grid_means()? {
        let p = fit_beta_params(h, &cfg)?.params;
        println!("{:>6.3}  {:>5.1}  {:>5.1}  {:>10.6}", p.mean(), p.alpha, p.beta, beta_moments(p).1);
    }
    Ok(())
}
