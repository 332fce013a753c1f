//! Beta diffusion of hard scores into per-document soft scores.
//!
//! Each adjusted hard score `h` becomes a `Beta(α, β)` with `α + β` fixed at
//! the configured concentration and `α` snapped to the increment grid so the
//! mean lands as close to `h` as the grid allows. Every document then gets a
//! single draw from its category's distribution.
//!
//! Draws come from counter-based substreams keyed by `(seed, document index)`,
//! so the output is independent of worker count and processing order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{MappedDocument, ScoredDocument};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::{self, Domain};
use crate::special::ln_beta;

pub const DEFAULT_SEED: u64 = 3407;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        beta_moments(*self).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionConfig {
    pub concentration: f64,
    pub increment: f64,
    pub seed: u64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            concentration: 20.0,
            increment: 0.5,
            seed: DEFAULT_SEED,
        }
    }
}

impl DiffusionConfig {
    /// Number of increments in the concentration; validated to be an integer ≥ 2.
    pub fn grid_units(&self) -> Result<u64> {
        if !(self.concentration > 0.0 && self.increment > 0.0) {
            return Err(Error::Config(
                "concentration and increment must be positive".into(),
            ));
        }
        let ratio = self.concentration / self.increment;
        let units = ratio.round();
        if (ratio - units).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "concentration {} is not a whole multiple of increment {}",
                self.concentration, self.increment
            )));
        }
        if units < 2.0 {
            return Err(Error::Config(format!(
                "concentration / increment = {units} leaves no room for both parameters"
            )));
        }
        Ok(units as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_units().map(|_| ())
    }

    /// All grid means `k / units` for `k = 1..units`.
    pub fn grid_means(&self) -> Result<Vec<f64>> {
        let n = self.grid_units()?;
        Ok((1..n).map(|k| k as f64 / n as f64).collect())
    }
}

/// Emitted when the snapped `α` fell off the grid and had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampWarning {
    pub hard_score: f64,
    pub params: BetaParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedBeta {
    pub params: BetaParams,
    pub clamped: bool,
}

/// Solves `α / (α + β) = h` under `α + β = concentration`, rounding `α`
/// half-up to the increment grid and clamping to
/// `[increment, concentration − increment]`.
pub fn fit_beta_params(h: f64, cfg: &DiffusionConfig) -> Result<FittedBeta> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!(
            "adjusted hard score {h} must lie strictly inside (0, 1)"
        )));
    }
    let units = cfg.grid_units()?;
    let raw = (h * units as f64 + 0.5).floor();
    let snapped = raw.clamp(1.0, (units - 1) as f64);
    let clamped = snapped != raw;
    let alpha = snapped * cfg.increment;
    let params = BetaParams {
        alpha,
        beta: cfg.concentration - alpha,
    };
    if clamped {
        log::warn!(
            "hard score {h} snapped outside the grid; clamped to Beta({}, {})",
            params.alpha,
            params.beta
        );
    }
    Ok(FittedBeta { params, clamped })
}

pub fn beta_pdf(x: f64, p: BetaParams) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("Beta density requires 0 < x < 1, got {x}")));
    }
    let ln = (p.alpha - 1.0) * x.ln() + (p.beta - 1.0) * (-x).ln_1p() - ln_beta(p.alpha, p.beta);
    Ok(ln.exp())
}

/// `(mean, variance)` of `Beta(α, β)`.
pub fn beta_moments(p: BetaParams) -> (f64, f64) {
    let s = p.alpha + p.beta;
    let mean = p.alpha / s;
    let variance = p.alpha * p.beta / (s * s * (s + 1.0));
    (mean, variance)
}

/// Marsaglia–Tsang squeeze/rejection; shapes below one use the
/// `Gamma(a + 1) · U^(1/a)` boost.
fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One draw from `Beta(α, β)` as `X / (X + Y)` with `X ~ Gamma(α)`,
/// `Y ~ Gamma(β)`. Draws that round to 0 or 1 are rejected.
pub fn sample_soft_score<R: Rng + ?Sized>(p: BetaParams, rng: &mut R) -> f64 {
    loop {
        let x = sample_gamma(p.alpha, rng);
        let y = sample_gamma(p.beta, rng);
        let r = x / (x + y);
        if r > 0.0 && r < 1.0 {
            return r;
        }
    }
}

/// The random stream owned by document `index` under `seed`.
pub fn document_stream(seed: u64, index: u64) -> ChaCha8Rng {
    rng::substream(seed, Domain::Diffusion, index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diffused {
    pub docs: Vec<ScoredDocument>,
    /// One entry per distinct hard score that needed clamping.
    pub warnings: Vec<ClampWarning>,
}

pub fn diffuse_corpus(docs: Vec<MappedDocument>, cfg: &DiffusionConfig) -> Result<Diffused> {
    diffuse_corpus_with(docs, cfg, Exec::default())
}

pub fn diffuse_corpus_with(
    docs: Vec<MappedDocument>,
    cfg: &DiffusionConfig,
    exec: Exec,
) -> Result<Diffused> {
    cfg.validate()?;
    let draws = par::try_map_indexed(exec, &docs, |i, d| {
        let fit = fit_beta_params(d.adjusted_score, cfg)?;
        let mut rng = document_stream(cfg.seed, i as u64);
        Ok::<_, Error>((sample_soft_score(fit.params, &mut rng), fit))
    })?;

    let mut warnings: Vec<ClampWarning> = Vec::new();
    let scored = docs
        .into_iter()
        .zip(draws)
        .map(|(d, (soft, fit))| {
            if fit.clamped && !warnings.iter().any(|w| w.hard_score == d.adjusted_score) {
                warnings.push(ClampWarning {
                    hard_score: d.adjusted_score,
                    params: fit.params,
                });
            }
            ScoredDocument {
                id: d.doc.id,
                text: d.doc.text,
                label: d.doc.label,
                hard_score: d.hard_score,
                adjusted_score: d.adjusted_score,
                soft_score: soft,
            }
        })
        .collect();
    Ok(Diffused {
        docs: scored,
        warnings,
    })
}
