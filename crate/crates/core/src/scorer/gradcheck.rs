use std::collections::BTreeSet;

use super::objective::{batch_gradient, batch_loss, Example};
use super::RelevanceModel;
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
const MAX_BATCH: usize = 16;
const MAX_ACTIVE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max |g_analytic − g_fd| / max(|g_analytic|, |g_fd|, 1e-8)`.
    pub max_rel_error: f64,
    pub coordinates: usize,
}

#[derive(Clone, Copy)]
enum Coord {
    RegWeight(usize),
    RegBias,
    ClassWeight(usize, usize),
    ClassBias(usize),
}

fn slot(model: &mut RelevanceModel, c: Coord) -> &mut f64 {
    let dim = model.dim();
    match c {
        Coord::RegWeight(j) => &mut model.regression_weights[j],
        Coord::RegBias => &mut model.regression_bias,
        Coord::ClassWeight(k, j) => &mut model.class_head.as_mut().unwrap().weights[k * dim + j],
        Coord::ClassBias(k) => &mut model.class_head.as_mut().unwrap().biases[k],
    }
}

/// Compares the analytic gradient of the training objective against central
/// finite differences on every parameter the batch touches.
pub fn grad_check(model: &RelevanceModel, batch: &[Example]) -> Result<GradCheck> {
    if batch.is_empty() || batch.len() > MAX_BATCH {
        return Err(Error::Config(format!(
            "gradient check needs 1..={MAX_BATCH} examples, got {}",
            batch.len()
        )));
    }
    let active: BTreeSet<u32> = batch
        .iter()
        .flat_map(|e| e.features.indices().iter().copied())
        .collect();
    if active.len() > MAX_ACTIVE {
        return Err(Error::Config(format!(
            "gradient check is limited to {MAX_ACTIVE} active features, batch has {}",
            active.len()
        )));
    }

    let g = batch_gradient(model, batch);
    let mut coords: Vec<(Coord, f64)> = vec![(Coord::RegBias, g.regression_bias)];
    for &j in &active {
        let a = g.regression_weights.get(&j).copied().unwrap_or(0.0);
        coords.push((Coord::RegWeight(j as usize), a));
    }
    if let Some(head) = &model.class_head {
        for k in 0..head.num_classes() {
            coords.push((Coord::ClassBias(k), g.class_biases[k]));
            for &j in &active {
                let a = g.class_weights.get(&j).map(|r| r[k]).unwrap_or(0.0);
                coords.push((Coord::ClassWeight(k, j as usize), a));
            }
        }
    }

    let mut m = model.clone();
    let mut worst = 0.0f64;
    for &(c, analytic) in &coords {
        let orig = *slot(&mut m, c);
        *slot(&mut m, c) = orig + FD_STEP;
        let up = batch_loss(&m, batch).total;
        *slot(&mut m, c) = orig - FD_STEP;
        let down = batch_loss(&m, batch).total;
        *slot(&mut m, c) = orig;
        let fd = (up - down) / (2.0 * FD_STEP);
        let denom = analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic - fd).abs() / denom);
    }
    Ok(GradCheck {
        max_rel_error: worst,
        coordinates: coords.len(),
    })
}
