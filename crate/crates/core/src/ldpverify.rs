//! Monte Carlo checks of the stationary large deviation principle: event
//! probabilities under pullback samples of `X*_ε(0)` and the extrapolation of
//! `ε log P` to `ε → 0`.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, TimeGrid};
use crate::noise::NoiseKey;
use crate::pullback::{pullback_with_key, PullbackOptions};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SampleOptions {
    /// Time step of the pullback runs; the model default when absent.
    pub dt: Option<f64>,
    pub pullback: PullbackOptions,
}

/// Seed of sample `index` of experiment `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// `n_samples` independent pullback evaluations of `X*_ε(0)`.
pub fn sample_stationary(
    model: &ModelSpec,
    eps: f64,
    n_samples: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Vec<Vec<f64>>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let dt = opts.dt.unwrap_or_else(|| model.default_dt());
    let view = TimeGrid::with_dt(-dt, 0.0, dt)?;
    let results: Vec<Result<Vec<f64>>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let key = NoiseKey::new(sample_seed(seed, i), model.modes());
            let (path, _) = pullback_with_key(model, eps, key, &view, &opts.pullback)?;
            Ok(path.last().to_vec())
        })
        .collect();
    results.into_iter().collect()
}

/// Events of the shipped family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Event {
    /// `‖x‖_H ≥ r`
    NormAtLeast { r: f64 },
    /// `x[index] ≥ r`
    CoordinateAtLeast { index: usize, r: f64 },
    /// `lo ≤ x ≤ hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Event {
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        match self {
            Event::NormAtLeast { r } if !r.is_finite() => Err(Error::InvalidInput(format!(
                "event radius {r} is not finite"
            ))),
            Event::CoordinateAtLeast { index, .. } if *index >= model.dim() => {
                Err(Error::InvalidInput(format!(
                    "coordinate {index} out of range for dimension {}",
                    model.dim()
                )))
            }
            Event::Box { lo, hi } if lo.len() != model.dim() || hi.len() != model.dim() => Err(
                Error::InvalidInput(format!("box bounds must have length {}", model.dim())),
            ),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, model: &ModelSpec, x: &[f64]) -> bool {
        match self {
            Event::NormAtLeast { r } => model.norm_h(x) >= *r,
            Event::CoordinateAtLeast { index, r } => x[*index] >= *r,
            Event::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| l <= v && v <= h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub eps: f64,
    pub event: Event,
    pub n_samples: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `ε log p_hat`, absent without hits.
    pub log_scaled: Option<f64>,
    /// Wilson score interval.
    pub ci_95: (f64, f64),
    pub low_statistics: bool,
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if p == 1.0 {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

impl MCEstimate {
    pub fn from_counts(eps: f64, event: Event, n_samples: usize, hits: usize) -> Self {
        let p_hat = hits as f64 / n_samples as f64;
        Self {
            eps,
            event,
            n_samples,
            hits,
            p_hat,
            log_scaled: (hits > 0).then(|| eps * p_hat.ln()),
            ci_95: wilson_interval(hits, n_samples, Z95),
            low_statistics: hits == 0,
        }
    }
}

/// One estimate per `ε`. Every `ε` reuses the same per-sample seeds, so the estimates
/// share their noise realizations.
pub fn estimate_event(
    model: &ModelSpec,
    eps_list: &[f64],
    event: &Event,
    n_samples: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Vec<MCEstimate>> {
    event.validate(model)?;
    eps_list
        .iter()
        .map(|&eps| {
            let xs = sample_stationary(model, eps, n_samples, seed, opts)?;
            let hits = xs.iter().filter(|x| event.contains(model, x)).count();
            let e = MCEstimate::from_counts(eps, event.clone(), n_samples, hits);
            if e.low_statistics {
                log::warn!("no hits at eps = {eps} in {n_samples} samples");
            }
            Ok(e)
        })
        .collect()
}

/// CSV with columns `eps,n,hits,p_hat,lo95,hi95,log_scaled`; `log_scaled` is empty without hits.
pub fn write_estimates_csv<W: Write>(estimates: &[MCEstimate], mut w: W) -> Result<()> {
    writeln!(w, "eps,n,hits,p_hat,lo95,hi95,log_scaled")?;
    for e in estimates {
        let ls = e.log_scaled.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.eps, e.n_samples, e.hits, e.p_hat, e.ci_95.0, e.ci_95.1, ls
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub eps: f64,
    pub log_scaled: f64,
    pub weight: f64,
}

impl SlopePoint {
    /// Weight `1/σ²` with `σ` the delta-method standard error of `ε log p` from the CI width.
    pub fn from_estimate(e: &MCEstimate) -> Option<Self> {
        let ls = e.log_scaled?;
        let (lo, hi) = e.ci_95;
        let se = e.eps * (hi - lo) / (2.0 * Z95 * e.p_hat);
        let weight = if se > 0.0 { 1.0 / (se * se) } else { 1.0 };
        Some(Self {
            eps: e.eps,
            log_scaled: ls,
            weight,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Weighted least-squares `ε log P ≈ intercept + slope·ε`.
    pub intercept: f64,
    pub slope: f64,
    /// `|intercept + reference|`.
    pub distance: f64,
    pub residuals: Vec<f64>,
    /// Linear extrapolation to `ε = 0` through the two smallest `ε`.
    pub richardson: f64,
}

impl FitReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fit report serializes")
    }
}

/// Extrapolate `ε log P` linearly to `ε → 0` and compare with `-reference`.
pub fn ldp_slope(points: &[SlopePoint], reference: f64) -> Result<FitReport> {
    let pts: Vec<&SlopePoint> = points
        .iter()
        .filter(|p| p.log_scaled.is_finite() && p.eps > 0.0 && p.weight > 0.0)
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "slope fit needs at least 3 points with hits, got {}",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.weight).sum();
    let mx = pts.iter().map(|p| p.weight * p.eps).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.weight * p.log_scaled).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.weight * (p.eps - mx).powi(2)).sum();
    let sxy: f64 = pts
        .iter()
        .map(|p| p.weight * (p.eps - mx) * (p.log_scaled - my))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(
            "slope fit needs distinct eps values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = pts
        .iter()
        .map(|p| p.log_scaled - (intercept + slope * p.eps))
        .collect();
    let mut by_eps = pts.clone();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let (a, b) = (by_eps[0], by_eps[1]);
    let richardson = if b.eps > a.eps {
        a.log_scaled - a.eps * (b.log_scaled - a.log_scaled) / (b.eps - a.eps)
    } else {
        a.log_scaled
    };
    Ok(FitReport {
        intercept,
        slope,
        distance: (intercept + reference).abs(),
        residuals,
        richardson,
    })
}
