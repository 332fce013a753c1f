use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::objective::{batch_gradient, batch_loss, Example};
use super::{ClassSpec, RelevanceModel, Variant};
use crate::dataset::ScoredRecord;
use crate::error::{Error, Result};
use crate::features::{featurize_all, FeatureConfig};
use crate::hashing;
use crate::par::{self, Exec};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub eval_interval_steps: usize,
    /// Consecutive non-improving evaluations tolerated before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 64,
            max_epochs: 5,
            eval_interval_steps: 200,
            early_stop_patience: 3,
            seed: crate::beta_diffusion::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // learning rate 0 is allowed: it freezes the initial weights
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.batch_size == 0
            || self.max_epochs == 0
            || self.eval_interval_steps == 0
            || self.early_stop_patience == 0
        {
            return Err(Error::Config(
                "batch_size, max_epochs, eval_interval_steps and early_stop_patience must be positive"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub epoch: f64,
    /// Mean training objective over the steps since the previous evaluation.
    pub train_loss: f64,
    pub eval_mse: f64,
    pub best_eval_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub points: Vec<EvalPoint>,
    pub best_step: usize,
    pub best_eval_mse: f64,
    pub total_steps: usize,
    pub stopped_early: bool,
}

fn examples(
    records: &[ScoredRecord],
    fcfg: &FeatureConfig,
    variant: Variant,
    classes: &ClassSpec,
) -> Result<Vec<Example>> {
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let feats = featurize_all(&texts, fcfg, Exec::default());
    records
        .iter()
        .zip(feats)
        .map(|(r, features)| {
            let class = match variant {
                Variant::A => None,
                Variant::B => Some(classes.index_of(&r.label)?),
            };
            Ok(Example {
                features,
                target: r.score,
                class,
            })
        })
        .collect()
}

fn eval_mse(model: &RelevanceModel, set: &[Example]) -> f64 {
    let preds = par::map_indexed(Exec::default(), set, |_, e| model.predict_features(&e.features));
    preds
        .iter()
        .zip(set)
        .map(|(p, e)| (p - e.target).powi(2))
        .sum::<f64>()
        / set.len() as f64
}

/// Trains a scorer of the given variant from exported records.
pub fn train(
    variant: Variant,
    train_set: &[ScoredRecord],
    eval_set: &[ScoredRecord],
    tcfg: &TrainConfig,
    fcfg: &FeatureConfig,
    classes: &ClassSpec,
) -> Result<(RelevanceModel, TrainingTrace)> {
    fcfg.validate()?;
    let tr = examples(train_set, fcfg, variant, classes)?;
    let ev = examples(eval_set, fcfg, variant, classes)?;
    let init = RelevanceModel::zeros(variant, fcfg.clone(), classes)?;
    train_examples(init, &tr, &ev, tcfg)
}

/// Mini-batch gradient descent from `init` on pre-featurized examples.
///
/// Eval-set MSE of the model's reported score is measured every
/// `eval_interval_steps` and once more after the final step; training stops
/// after `early_stop_patience` consecutive evaluations without a strict
/// improvement, and the best checkpoint is returned.
pub fn train_examples(
    init: RelevanceModel,
    train_set: &[Example],
    eval_set: &[Example],
    tcfg: &TrainConfig,
) -> Result<(RelevanceModel, TrainingTrace)> {
    tcfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if eval_set.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let config_hash = hashing::json_hash(&serde_json::json!({
        "train": tcfg,
        "features": init.feature_config,
        "variant": init.variant,
    }));

    let mut model = init;
    model.train_config_hash = Some(config_hash.clone());
    let mut best = model.clone();
    let mut best_mse = f64::INFINITY;
    let mut best_step = 0;
    let mut points = Vec::new();
    let mut stale = 0;
    let mut step = 0;
    let mut loss_acc = 0.0;
    let mut loss_n = 0usize;
    let mut stopped_early = false;
    let steps_per_epoch = train_set.len().div_ceil(tcfg.batch_size);

    let mut evaluate = |model: &RelevanceModel, step: usize, loss_acc: f64, loss_n: usize| {
        let mse = eval_mse(model, eval_set);
        let improved = mse < best_mse;
        if improved {
            best_mse = mse;
            best_step = step;
            best = model.clone();
        }
        points.push(EvalPoint {
            step,
            epoch: step as f64 / steps_per_epoch as f64,
            train_loss: if loss_n > 0 { loss_acc / loss_n as f64 } else { f64::NAN },
            eval_mse: mse,
            best_eval_mse: best_mse,
        });
        improved
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    'epochs: for epoch in 0..tcfg.max_epochs {
        let mut rng = rng::substream(tcfg.seed, Domain::Shuffle, epoch as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let loss = batch_loss(&model, &batch).total;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    learning_rate: tcfg.learning_rate,
                });
            }
            batch_gradient(&model, &batch).apply(&mut model, tcfg.learning_rate);
            step += 1;
            loss_acc += loss;
            loss_n += 1;
            if step % tcfg.eval_interval_steps == 0 {
                let improved = evaluate(&model, step, loss_acc, loss_n);
                loss_acc = 0.0;
                loss_n = 0;
                stale = if improved { 0 } else { stale + 1 };
                if stale >= tcfg.early_stop_patience {
                    stopped_early = true;
                    break 'epochs;
                }
            }
        }
    }
    if !stopped_early && step % tcfg.eval_interval_steps != 0 {
        evaluate(&model, step, loss_acc, loss_n);
    }
    if !best_mse.is_finite() {
        return Err(Error::NonFiniteLoss {
            step,
            learning_rate: tcfg.learning_rate,
        });
    }
    Ok((
        best,
        TrainingTrace {
            points,
            best_step,
            best_eval_mse: best_mse,
            total_steps: step,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;

    fn tiny_examples(n: usize) -> Vec<Example> {
        let cfg = FeatureConfig {
            hash_dim: 1 << 8,
            ..FeatureConfig::default()
        };
        (0..n)
            .map(|i| Example {
                features: crate::features::featurize(&format!("doc number {i}"), &cfg),
                target: if i % 2 == 0 { 0.9 } else { 0.1 },
                class: Some(i % 2),
            })
            .collect()
    }

    fn init(variant: Variant) -> RelevanceModel {
        let spec = ClassSpec {
            labels: vec!["even".into(), "odd".into()],
            class_scores: vec![0.9, 0.1],
        };
        RelevanceModel::zeros(
            variant,
            FeatureConfig {
                hash_dim: 1 << 8,
                ..FeatureConfig::default()
            },
            &spec,
        )
        .unwrap()
    }

    #[test]
    fn frozen_weights_stop_after_two_evaluations() {
        let data = tiny_examples(40);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 4,
            max_epochs: 10,
            eval_interval_steps: 2,
            early_stop_patience: 1,
            seed: 1,
        };
        for variant in [Variant::A, Variant::B] {
            let start = init(variant);
            let (model, trace) = train_examples(start.clone(), &data, &data, &cfg).unwrap();
            assert_eq!(trace.points.len(), 2);
            assert!(trace.stopped_early);
            assert_eq!(model.regression_weights, start.regression_weights);
            assert_eq!(model.class_head, start.class_head);
        }
    }

    #[test]
    fn best_checkpoint_is_never_worse_than_any_eval_point() {
        let data = tiny_examples(64);
        let cfg = TrainConfig {
            learning_rate: 5.0,
            batch_size: 8,
            max_epochs: 6,
            eval_interval_steps: 3,
            early_stop_patience: 4,
            seed: 9,
        };
        let (_, trace) = train_examples(init(Variant::A), &data, &data, &cfg).unwrap();
        for p in &trace.points {
            assert!(trace.best_eval_mse <= p.eval_mse);
        }
        assert!(trace.points.windows(2).all(|w| w[1].best_eval_mse <= w[0].best_eval_mse));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = tiny_examples(50);
        let cfg = TrainConfig {
            batch_size: 7,
            eval_interval_steps: 5,
            learning_rate: 2.0,
            ..TrainConfig::default()
        };
        let (a, _) = train_examples(init(Variant::B), &data, &data, &cfg).unwrap();
        let (b, _) = train_examples(init(Variant::B), &data, &data, &cfg).unwrap();
        let bits = |m: &RelevanceModel| {
            m.regression_weights
                .iter()
                .chain(&m.class_head.as_ref().unwrap().weights)
                .map(|w| w.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn rejects_empty_sets_and_bad_config() {
        let data = tiny_examples(4);
        assert!(train_examples(init(Variant::A), &[], &data, &TrainConfig::default()).is_err());
        assert!(train_examples(init(Variant::A), &data, &[], &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train_examples(init(Variant::A), &data, &data, &bad).is_err());
    }

    #[test]
    fn nan_targets_abort_with_guidance() {
        let mut data = tiny_examples(4);
        data[0].target = f64::NAN;
        let err = train_examples(init(Variant::A), &data, &data, &TrainConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { step: 0, .. }));
        assert!(err.to_string().contains("learning rate"));
    }
}
