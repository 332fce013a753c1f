//! Optional TOML run configuration. Precedence when resolving a run:
//! command-line flags, then this file, then built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use relscore_core::beta_diffusion::DiffusionConfig;
use relscore_core::dataset::SplitSpec;
use relscore_core::features::FeatureConfig;
use relscore_core::relevance_map::BoundaryRule;
use relscore_core::scorer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CapsMode {
    /// Per-bucket caps from the mapping table's count column.
    #[default]
    Hints,
    /// Keep every document.
    None,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub interval_width: Option<f64>,
    pub caps: Option<CapsMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tolerances: Option<Vec<f64>>,
    pub relevant_label: Option<String>,
    pub other_label: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub endpoints: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub variance: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Overrides every stage seed.
    pub seed: Option<u64>,
    pub mapping: Option<PathBuf>,
    pub boundary_rules: Option<Vec<BoundaryRule>>,
    pub diffusion: Option<DiffusionConfig>,
    pub dataset: DatasetSection,
    pub split: Option<SplitSpec>,
    pub features: Option<FeatureConfig>,
    pub train: Option<TrainConfig>,
    pub eval: EvalSection,
    pub bench: BenchSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let src = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&src).with_context(|| format!("parsing config {}", path.display()))
    }
}
