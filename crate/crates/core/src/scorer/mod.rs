//! Relevance scorers over hashed n-gram features.
//!
//! Variant A is a single logistic regression head trained on MSE against the
//! soft scores. Variant B adds a classification head over the mapping-table
//! categories, is trained on `½ (CE + MSE)`, and reports the
//! probability-weighted mean of the (adjusted) class scores.

mod artifact;
mod gradcheck;
mod objective;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{featurize, FeatureConfig, SparseVector};
use crate::relevance_map::{adjusted_scores, BoundaryPolicy, MappingTable};

pub use artifact::{artifact_hash, load_model, save_model, ARTIFACT_MAGIC};
pub use gradcheck::{grad_check, GradCheck, FD_STEP};
pub use objective::{batch_gradient, batch_loss, Example, Gradient, LossBreakdown};
pub use train::{train, train_examples, EvalPoint, TrainConfig, TrainingTrace};

/// Outputs of the logistic link are kept inside `[P_EPS, 1 − P_EPS]`.
pub const P_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Direct score regression.
    A,
    /// Classification plus regression; scores via class probabilities.
    B,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Variant::A),
            "b" | "B" => Ok(Variant::B),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected a or b)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::A => "A",
            Variant::B => "B",
        })
    }
}

/// Class order and per-class adjusted scores for the classification head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub labels: Vec<String>,
    pub class_scores: Vec<f64>,
}

impl ClassSpec {
    pub fn from_mapping(table: &MappingTable, policy: &BoundaryPolicy) -> Result<Self> {
        Ok(Self {
            labels: table.labels().map(str::to_string).collect(),
            class_scores: adjusted_scores(table, policy)?,
        })
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassHead {
    pub spec: ClassSpec,
    /// Row-major `num_classes × hash_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ClassHead {
    pub fn num_classes(&self) -> usize {
        self.spec.labels.len()
    }

    pub fn logits(&self, x: &SparseVector, dim: usize) -> Vec<f64> {
        (0..self.num_classes())
            .map(|c| {
                let row = &self.weights[c * dim..(c + 1) * dim];
                self.biases[c] + x.dot_dense(row)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceModel {
    pub variant: Variant,
    pub feature_config: FeatureConfig,
    pub regression_weights: Vec<f64>,
    pub regression_bias: f64,
    /// Present exactly for variant B.
    pub class_head: Option<ClassHead>,
    pub train_config_hash: Option<String>,
}

impl RelevanceModel {
    /// All-zero model of the given variant.
    pub fn zeros(variant: Variant, feature_config: FeatureConfig, classes: &ClassSpec) -> Result<Self> {
        feature_config.validate()?;
        let dim = feature_config.hash_dim;
        let class_head = match variant {
            Variant::A => None,
            Variant::B => {
                if classes.labels.is_empty() || classes.labels.len() != classes.class_scores.len() {
                    return Err(Error::Config(
                        "variant B needs a non-empty class list with one score per class".into(),
                    ));
                }
                let k = classes.labels.len();
                Some(ClassHead {
                    spec: classes.clone(),
                    weights: vec![0.0; k * dim],
                    biases: vec![0.0; k],
                })
            }
        };
        Ok(Self {
            variant,
            feature_config,
            regression_weights: vec![0.0; dim],
            regression_bias: 0.0,
            class_head,
            train_config_hash: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_config.hash_dim
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        featurize(text, &self.feature_config)
    }

    /// Output of the regression head, `logistic(w·x + b)`.
    pub fn regression_head(&self, x: &SparseVector) -> f64 {
        logistic(self.regression_bias + x.dot_dense(&self.regression_weights))
    }

    /// Softmax of the class logits (variant B only).
    pub fn class_probs(&self, x: &SparseVector) -> Option<Vec<f64>> {
        self.class_head
            .as_ref()
            .map(|h| softmax(&h.logits(x, self.dim())))
    }

    pub fn predict_features(&self, x: &SparseVector) -> f64 {
        match &self.class_head {
            None => self.regression_head(x),
            Some(h) => {
                let probs = softmax(&h.logits(x, self.dim()));
                expected_score(&probs, &h.spec.class_scores)
            }
        }
    }

    pub fn predict_score(&self, text: &str) -> f64 {
        self.predict_features(&self.featurize(text))
    }
}

pub fn predict_score(model: &RelevanceModel, text: &str) -> f64 {
    model.predict_score(text)
}

pub fn logistic(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(P_EPS, 1.0 - P_EPS)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln Σ exp(logits)`, shifted by the max for stability.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn expected_score(probs: &[f64], class_scores: &[f64]) -> f64 {
    probs.iter().zip(class_scores).map(|(p, s)| p * s).sum()
}

/// Reduces class probabilities to a relevance score: `Σ_c p_c · score_c`.
pub fn probs_to_score(probs: &[f64], class_scores: &[f64]) -> Result<f64> {
    if probs.len() != class_scores.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: class_scores.len(),
        });
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::NotSimplex { sum });
    }
    Ok(expected_score(probs, class_scores))
}
