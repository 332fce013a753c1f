#![allow(dead_code)]

pub mod mock_server;

use relscore_core::beta_diffusion::{diffuse_corpus, DiffusionConfig};
use relscore_core::dataset::{map_corpus, split, Partitions, ScoredRecord, SplitSpec};
use relscore_core::features::FeatureConfig;
use relscore_core::relevance_map::{BoundaryPolicy, MappingTable};
use relscore_core::scorer::{train, ClassSpec, RelevanceModel, TrainConfig, TrainingTrace, Variant};
use relscore_core::synthetic::{SyntheticCorpus, SyntheticSpec};

pub struct SyntheticData {
    pub corpus: SyntheticCorpus,
    pub table: MappingTable,
    pub classes: ClassSpec,
    pub train: Vec<ScoredRecord>,
    pub eval: Vec<ScoredRecord>,
    pub test: Vec<ScoredRecord>,
}

/// Synthetic corpus pushed through map, diffuse and split.
pub fn synthetic_data(spec: SyntheticSpec) -> SyntheticData {
    let corpus = SyntheticCorpus::new(spec).unwrap();
    let table = corpus.mapping_table().unwrap();
    let policy = BoundaryPolicy::default();
    let mapped = map_corpus(corpus.documents(), &table, &policy).unwrap();
    let diffused = diffuse_corpus(mapped, &DiffusionConfig::default()).unwrap();
    let Partitions { train, eval, test } = split(diffused.docs, &SplitSpec::default()).unwrap();
    let rec = |v: Vec<_>| v.into_iter().map(ScoredRecord::from).collect::<Vec<_>>();
    SyntheticData {
        classes: ClassSpec::from_mapping(&table, &policy).unwrap(),
        corpus,
        table,
        train: rec(train),
        eval: rec(eval),
        test: rec(test),
    }
}

pub fn small_features() -> FeatureConfig {
    FeatureConfig {
        hash_dim: 1 << 16,
        ..FeatureConfig::default()
    }
}

pub fn synthetic_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 2.0,
        batch_size: 32,
        max_epochs: 30,
        eval_interval_steps: 40,
        early_stop_patience: 5,
        ..TrainConfig::default()
    }
}

pub fn train_synthetic(data: &SyntheticData, variant: Variant) -> (RelevanceModel, TrainingTrace) {
    train(
        variant,
        &data.train,
        &data.eval,
        &synthetic_train_config(),
        &small_features(),
        &data.classes,
    )
    .unwrap()
}
