//! Batch losses and their analytic gradients.

use fnv::FnvHashMap;

use super::{log_sum_exp, softmax, RelevanceModel};
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    /// Soft-score regression target.
    pub target: f64,
    /// Class index into the model's class order (needed by variant B).
    pub class: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Mean squared error of the regression head.
    pub mse: f64,
    /// Mean cross-entropy of the class head (variant B only).
    pub cross_entropy: Option<f64>,
    /// The optimized objective: `mse` for A, `½ (CE + MSE)` for B.
    pub total: f64,
}

/// Gradient of the batch objective, sparse in the feature dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub regression_weights: FnvHashMap<u32, f64>,
    pub regression_bias: f64,
    /// feature → per-class gradient.
    pub class_weights: FnvHashMap<u32, Vec<f64>>,
    pub class_biases: Vec<f64>,
}

fn class_of(e: &Example) -> usize {
    e.class
        .expect("variant B examples carry a class index")
}

pub fn batch_loss(model: &RelevanceModel, batch: &[Example]) -> LossBreakdown {
    let n = batch.len() as f64;
    let mse = batch
        .iter()
        .map(|e| (model.regression_head(&e.features) - e.target).powi(2))
        .sum::<f64>()
        / n;
    match &model.class_head {
        None => LossBreakdown {
            mse,
            cross_entropy: None,
            total: mse,
        },
        Some(head) => {
            let ce = batch
                .iter()
                .map(|e| {
                    let logits = head.logits(&e.features, model.dim());
                    log_sum_exp(&logits) - logits[class_of(e)]
                })
                .sum::<f64>()
                / n;
            LossBreakdown {
                mse,
                cross_entropy: Some(ce),
                total: 0.5 * (ce + mse),
            }
        }
    }
}

/// Analytic gradient of [`batch_loss`]`.total`.
pub fn batch_gradient(model: &RelevanceModel, batch: &[Example]) -> Gradient {
    let n = batch.len() as f64;
    let head_weight = if model.class_head.is_some() { 0.5 } else { 1.0 };
    let mut g = Gradient::default();
    for e in batch {
        let p = model.regression_head(&e.features);
        // d/dz (p − y)² with p = σ(z)
        let dz = head_weight * 2.0 * (p - e.target) * p * (1.0 - p) / n;
        g.regression_bias += dz;
        for (j, v) in e.features.iter() {
            *g.regression_weights.entry(j).or_insert(0.0) += dz * v;
        }
    }
    if let Some(head) = &model.class_head {
        let k = head.num_classes();
        g.class_biases = vec![0.0; k];
        for e in batch {
            let mut d = softmax(&head.logits(&e.features, model.dim()));
            d[class_of(e)] -= 1.0;
            for (b, dc) in g.class_biases.iter_mut().zip(d.iter_mut()) {
                *dc *= 0.5 / n;
                *b += *dc;
            }
            for (j, v) in e.features.iter() {
                let row = g.class_weights.entry(j).or_insert_with(|| vec![0.0; k]);
                for (r, dc) in row.iter_mut().zip(&d) {
                    *r += dc * v;
                }
            }
        }
    }
    g
}

impl Gradient {
    /// Plain gradient step: `θ ← θ − lr · g`.
    pub(crate) fn apply(&self, model: &mut RelevanceModel, lr: f64) {
        let dim = model.dim();
        for (&j, &gj) in &self.regression_weights {
            model.regression_weights[j as usize] -= lr * gj;
        }
        model.regression_bias -= lr * self.regression_bias;
        if let Some(head) = model.class_head.as_mut() {
            for (&j, row) in &self.class_weights {
                for (c, gc) in row.iter().enumerate() {
                    head.weights[c * dim + j as usize] -= lr * gc;
                }
            }
            for (b, gb) in head.biases.iter_mut().zip(&self.class_biases) {
                *b -= lr * gb;
            }
        }
    }
}
