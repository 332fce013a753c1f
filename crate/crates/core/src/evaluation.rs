//! Tolerance-gated metrics and the cosine-softmax baseline.
//!
//! A regression prediction counts as correct when it lies within `tau` of its
//! target. For F1 each target is assigned a binary class (relevant when
//! `target ≥ class_threshold`); a correct prediction keeps the target's class,
//! an incorrect one flips it, and F1 is taken over the relevant class.

use serde::{Deserialize, Serialize};

use crate::dataset::ScoredRecord;
use crate::error::{Error, Result};
use crate::features::{featurize, featurize_all, FeatureConfig, SparseVector};
use crate::par::{self, Exec};
use crate::scorer::RelevanceModel;

pub const DEFAULT_TOLERANCES: [f64; 2] = [0.1, 0.2];
pub const DEFAULT_CLASS_THRESHOLD: f64 = 0.5;

fn check_pair(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("prediction vector"));
    }
    if let Some(v) = preds
        .iter()
        .chain(targets)
        .find(|v| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Domain(format!("score {v} is outside [0, 1]")));
    }
    Ok(())
}

fn within(p: f64, t: f64, tau: f64) -> bool {
    (p - t).abs() <= tau
}

pub fn tolerance_accuracy(preds: &[f64], targets: &[f64], tau: f64) -> Result<f64> {
    check_pair(preds, targets)?;
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| within(**p, **t, tau))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub value: f64,
    /// Set when there were no positive targets or no positive predictions.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn tolerance_confusion(
    preds: &[f64],
    targets: &[f64],
    tau: f64,
    class_threshold: f64,
) -> Result<Confusion> {
    check_pair(preds, targets)?;
    let mut c = Confusion::default();
    for (p, t) in preds.iter().zip(targets) {
        let truth = *t >= class_threshold;
        let predicted = if within(*p, *t, tau) { truth } else { !truth };
        match (truth, predicted) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

impl Confusion {
    pub fn f1(&self) -> F1Score {
        if self.tp + self.fn_ == 0 || self.tp + self.fp == 0 {
            return F1Score {
                value: 0.0,
                degenerate: true,
            };
        }
        F1Score {
            value: 2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64,
            degenerate: false,
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64
    }
}

pub fn tolerance_f1(
    preds: &[f64],
    targets: &[f64],
    tau: f64,
    class_threshold: f64,
) -> Result<F1Score> {
    Ok(tolerance_confusion(preds, targets, tau, class_threshold)?.f1())
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("prediction vector"));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRow {
    pub tolerance: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mse: f64,
    pub class_threshold: f64,
    pub rows: Vec<ToleranceRow>,
}

impl EvalReport {
    pub fn from_predictions(preds: &[f64], targets: &[f64], tolerances: &[f64]) -> Result<Self> {
        if tolerances.is_empty() {
            return Err(Error::Empty("tolerance list"));
        }
        let mut tols = tolerances.to_vec();
        tols.sort_by(f64::total_cmp);
        tols.dedup();
        let rows = tols
            .iter()
            .map(|&tau| {
                let f1 = tolerance_f1(preds, targets, tau, DEFAULT_CLASS_THRESHOLD)?;
                Ok(ToleranceRow {
                    tolerance: tau,
                    accuracy: tolerance_accuracy(preds, targets, tau)?,
                    f1: f1.value,
                    f1_degenerate: f1.degenerate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: preds.len(),
            mse: mse(preds, targets)?,
            class_threshold: DEFAULT_CLASS_THRESHOLD,
            rows,
        })
    }

    /// Aligned text table, one row per tolerance.
    pub fn render_table(&self, model_name: &str) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| format!("{model_name} (Error Tolerance {})", r.tolerance).len())
            .max()
            .unwrap_or(10)
            .max("Model".len());
        let mut s = format!("{:<name_w$}  {:>9}  {:>8}\n", "Model", "Accuracy", "F1 Score");
        s.push_str(&format!("{}\n", "-".repeat(name_w + 21)));
        for r in &self.rows {
            let name = format!("{model_name} (Error Tolerance {})", r.tolerance);
            s.push_str(&format!(
                "{:<name_w$}  {:>8.2}%  {:>8.4}{}\n",
                name,
                r.accuracy * 100.0,
                r.f1,
                if r.f1_degenerate { " *" } else { "" }
            ));
        }
        s.push_str(&format!("MSE {:.6} over {} documents\n", self.mse, self.n));
        if self.rows.iter().any(|r| r.f1_degenerate) {
            s.push_str("* F1 undefined (no relevant targets or predictions); reported as 0\n");
        }
        s
    }
}

/// Scores every document and assembles a report for each tolerance.
pub fn evaluate_model(
    model: &RelevanceModel,
    test_set: &[ScoredRecord],
    tolerances: &[f64],
) -> Result<EvalReport> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let preds = par::map_indexed(Exec::default(), test_set, |_, r| model.predict_score(&r.text));
    let targets: Vec<f64> = test_set.iter().map(|r| r.score).collect();
    EvalReport::from_predictions(&preds, &targets, tolerances)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineLabel {
    Relevant,
    NotRelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselinePrediction {
    pub label: BaselineLabel,
    /// `[p(relevant), p(not relevant)]`.
    pub probs: [f64; 2],
}

/// Softmax over the cosine similarities to the two class anchors.
pub fn cosine_softmax_baseline(
    doc: &SparseVector,
    relevant_anchor: &SparseVector,
    other_anchor: &SparseVector,
) -> Result<BaselinePrediction> {
    let zero = || Error::Domain("cosine baseline needs non-zero vectors".into());
    let a = doc.cosine(relevant_anchor).ok_or_else(zero)?;
    let b = doc.cosine(other_anchor).ok_or_else(zero)?;
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let probs = [ea / (ea + eb), eb / (ea + eb)];
    let label = if probs[0] >= probs[1] {
        BaselineLabel::Relevant
    } else {
        BaselineLabel::NotRelevant
    };
    Ok(BaselinePrediction { label, probs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    pub relevant: SparseVector,
    pub other: SparseVector,
}

fn mean_vector(vs: &[SparseVector]) -> SparseVector {
    let pairs = vs.iter().flat_map(|v| v.iter()).collect();
    SparseVector::from_pairs(pairs).scaled(1.0 / vs.len() as f64)
}

/// Class anchors as the mean feature vector of documents carrying each label.
pub fn build_anchors(
    train: &[ScoredRecord],
    cfg: &FeatureConfig,
    relevant_label: &str,
    other_label: &str,
) -> Result<Anchors> {
    let pick = |label: &str| -> Result<SparseVector> {
        let texts: Vec<&str> = train
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.text.as_str())
            .collect();
        if texts.is_empty() {
            return Err(Error::UnknownLabel {
                label: label.to_string(),
            });
        }
        Ok(mean_vector(&featurize_all(&texts, cfg, Exec::default())))
    };
    Ok(Anchors {
        relevant: pick(relevant_label)?,
        other: pick(other_label)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_degenerate: bool,
}

/// Binary relevant/not-relevant evaluation of the baseline, with ground truth
/// `target ≥ class_threshold`.
pub fn evaluate_baseline(
    anchors: &Anchors,
    test_set: &[ScoredRecord],
    cfg: &FeatureConfig,
    class_threshold: f64,
) -> Result<BaselineReport> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let preds = par::try_map_indexed(Exec::default(), test_set, |_, r| {
        cosine_softmax_baseline(&featurize(&r.text, cfg), &anchors.relevant, &anchors.other)
    })?;
    let mut c = Confusion::default();
    for (p, r) in preds.iter().zip(test_set) {
        let truth = r.score >= class_threshold;
        let predicted = p.label == BaselineLabel::Relevant;
        match (truth, predicted) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    let f1 = c.f1();
    Ok(BaselineReport {
        n: test_set.len(),
        accuracy: c.accuracy(),
        f1: f1.value,
        f1_degenerate: f1.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_cases() {
        let t = [0.2, 0.5, 0.9];
        assert_eq!(tolerance_accuracy(&t, &t, 0.1).unwrap(), 1.0);
        let p = [0.35, 0.65, 0.75];
        assert_eq!(tolerance_accuracy(&p, &t, 0.1).unwrap(), 0.0);
        assert_eq!(tolerance_accuracy(&p, &t, 0.2).unwrap(), 1.0);
        let a = tolerance_accuracy(&[0.8, 0.3, 0.5], &[0.95, 0.35, 0.9], 0.1).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            tolerance_accuracy(&[0.1], &[0.1, 0.2], 0.1),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(tolerance_accuracy(&[], &[], 0.1).is_err());
    }

    #[test]
    fn f1_cases() {
        let t = [0.9, 0.1, 0.7, 0.3];
        let f = tolerance_f1(&t, &t, 0.1, 0.5).unwrap();
        assert_eq!(f.value, 1.0);
        assert!(!f.degenerate);
        // all outside tolerance: every positive becomes FN, every negative FP
        let far = [0.3, 0.6, 0.2, 0.8];
        assert_eq!(tolerance_f1(&far, &t, 0.1, 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn f1_mixed_six_elements_by_hand() {
        // targets: 0.9(+) 0.8(+) 0.6(+) 0.4(−) 0.2(−) 0.1(−), tau 0.1
        // preds:   0.85 ok→TP, 0.5 miss→FN, 0.65 ok→TP,
        //          0.45 ok→TN, 0.45 miss→FP, 0.12 ok→TN
        // TP=2 FP=1 FN=1 → F1 = 4/6
        let targets = [0.9, 0.8, 0.6, 0.4, 0.2, 0.1];
        let preds = [0.85, 0.5, 0.65, 0.45, 0.45, 0.12];
        let c = tolerance_confusion(&preds, &targets, 0.1, 0.5).unwrap();
        assert_eq!(c, Confusion { tp: 2, fp: 1, tn: 2, fn_: 1 });
        let f = tolerance_f1(&preds, &targets, 0.1, 0.5).unwrap();
        assert!((f.value - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn f1_degenerate_flag() {
        let t = [0.1, 0.2];
        let f = tolerance_f1(&t, &t, 0.1, 0.5).unwrap();
        assert_eq!(f.value, 0.0);
        assert!(f.degenerate);
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((mse(&[0.2, 0.8], &[0.0, 1.0]).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn baseline_cases() {
        let gov = SparseVector::from_dense(&[1.0, 0.0]);
        let other = SparseVector::from_dense(&[0.0, 1.0]);
        let p = cosine_softmax_baseline(&gov, &gov, &other).unwrap();
        let e = std::f64::consts::E;
        assert_eq!(p.label, BaselineLabel::Relevant);
        assert!((p.probs[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p.probs[0] - 0.7311).abs() < 1e-4);
        let mid = SparseVector::from_dense(&[1.0, 1.0]);
        let p = cosine_softmax_baseline(&mid, &gov, &other).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-15);
        let doc = SparseVector::from_dense(&[0.3, 0.8]);
        let a = cosine_softmax_baseline(&doc, &gov, &other).unwrap();
        let b = cosine_softmax_baseline(&doc.scaled(7.0), &gov, &other).unwrap();
        assert_eq!(a.label, b.label);
        assert!((a.probs[0] - b.probs[0]).abs() < 1e-15);
        assert!(cosine_softmax_baseline(&SparseVector::default(), &gov, &other).is_err());
    }

    #[test]
    fn report_has_one_row_per_tolerance() {
        let t = [0.9, 0.1, 0.6];
        let r = EvalReport::from_predictions(&t, &t, &DEFAULT_TOLERANCES).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].tolerance, 0.1);
        assert_eq!(r.rows[1].tolerance, 0.2);
        assert!(r.rows.iter().all(|row| row.accuracy == 1.0));
        let table = r.render_table("A");
        assert!(table.contains("A (Error Tolerance 0.1)"));
        assert!(table.contains("100.00%"));
    }

    proptest! {
        #[test]
        fn metrics_monotone_in_tolerance(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..100),
            lo in 0.0f64..0.5, extra in 0.0f64..0.5,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let hi = lo + extra;
            prop_assert!(tolerance_accuracy(&p, &t, hi).unwrap() >= tolerance_accuracy(&p, &t, lo).unwrap());
            prop_assert!(tolerance_f1(&p, &t, hi, 0.5).unwrap().value >= tolerance_f1(&p, &t, lo, 0.5).unwrap().value);
            prop_assert_eq!(tolerance_accuracy(&p, &t, 1.0).unwrap(), 1.0);
        }
    }
}
