//! Stationary solutions by pullback: integrate from ever earlier start times `-n`
//! over one frozen realization and watch the restrictions to a fixed view window
//! form a Cauchy sequence.

use serde::{Deserialize, Serialize};

use crate::action::Control;
use crate::error::{Error, Result};
use crate::integrate::{em_run, skeleton_run, Path, SkeletonScheme, DEFAULT_BLOWUP};
use crate::model::{ModelSpec, TimeGrid};
use crate::noise::NoiseKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullbackOptions {
    /// Start times are `-n` for each `n`; `None` picks `N + {5, 10, 20}/(λC₁)`.
    pub horizons: Option<Vec<f64>>,
    /// Sup-norm tolerance on the last consecutive gap.
    pub tol: f64,
    pub blowup: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            horizons: None,
            tol: 1e-4,
            blowup: DEFAULT_BLOWUP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackDiag {
    /// Horizons actually used, rounded to the time lattice.
    pub horizons: Vec<f64>,
    /// `sup_view ‖X^{n_{j+1}} - X^{n_j}‖_H`, one per consecutive pair.
    pub gaps: Vec<f64>,
    /// Least-squares slope of `ln gap_j` against `n_j`; `None` with fewer than two positive gaps.
    pub fitted_rate: Option<f64>,
    /// Per pair, `ln(gap_j / d_j) / (n_j + t_view)` where `d_j` is the distance of the longer
    /// run from the start state at time `-n_j`. Exactly `-a` for a linear contraction `e^{-at}`.
    pub contraction_rates: Vec<f64>,
    pub converged: bool,
}

impl PullbackDiag {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("diagnostics serialize")
    }
}

/// `N + {5, 10, 20}/(λC₁)` with `N = -view.t_start` (at least 0).
pub fn default_horizons(model: &ModelSpec, view: &TimeGrid) -> Vec<f64> {
    let n = (-view.t_start()).max(0.0);
    let unit = 1.0 / model.relaxation_rate();
    [5.0, 10.0, 20.0].iter().map(|m| n + m * unit).collect()
}

/// Lattice indices of the start times `-n_j`, strictly decreasing and not after the view.
fn start_indices(model: &ModelSpec, view: &TimeGrid, opts: &PullbackOptions) -> Result<Vec<i64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let horizons = opts
        .horizons
        .clone()
        .unwrap_or_else(|| default_horizons(model, view));
    if horizons.is_empty() {
        return Err(Error::InvalidInput("need at least one horizon".into()));
    }
    let dt = view.dt();
    let l0 = view.lattice_start();
    let mut out: Vec<i64> = Vec::with_capacity(horizons.len());
    for &n in &horizons {
        if !n.is_finite() {
            return Err(Error::InvalidInput(format!("horizon {n} is not finite")));
        }
        let s = (-n / dt).round() as i64;
        if s > l0 {
            return Err(Error::InvalidInput(format!(
                "horizon {n} starts after the view window begins at {}",
                view.t_start()
            )));
        }
        if let Some(&prev) = out.last() {
            if s >= prev {
                return Err(Error::InvalidInput(format!(
                    "horizons must be strictly increasing on the dt = {dt} lattice: {horizons:?}"
                )));
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// The grid from lattice index `start` to the end of `view`, sharing the view's nodes.
fn extended_grid(view: &TimeGrid, start: i64) -> Result<TimeGrid> {
    let extra = (view.lattice_start() - start) as usize;
    TimeGrid::new(
        view.t_start() - extra as f64 * view.dt(),
        view.t_end(),
        view.steps() + extra,
    )
}

/// One pullback run, keeping the view window and the state at `probe` (a node index).
struct Run {
    view: Vec<f64>,
    probe: Option<Vec<f64>>,
}

fn record(
    extra: usize,
    probe: Option<usize>,
    run: impl FnOnce(&mut dyn FnMut(usize, &[f64])) -> Result<()>,
) -> Result<Run> {
    let mut out = Run {
        view: Vec::new(),
        probe: None,
    };
    run(&mut |i, x| {
        if i >= extra {
            out.view.extend_from_slice(x);
        }
        if Some(i) == probe {
            out.probe = Some(x.to_vec());
        }
    })?;
    Ok(out)
}

fn sup_gap(model: &ModelSpec, a: &[f64], b: &[f64]) -> f64 {
    let d = model.dim();
    let mut diff = vec![0.0; d];
    a.chunks(d)
        .zip(b.chunks(d))
        .map(|(x, y)| {
            for j in 0..d {
                diff[j] = x[j] - y[j];
            }
            model.norm_h(&diff)
        })
        .fold(0.0, f64::max)
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Shared iteration. `run(grid, visit)` integrates one horizon over `grid`.
fn iterate(
    model: &ModelSpec,
    view: &TimeGrid,
    opts: &PullbackOptions,
    seed: Option<u64>,
    mut run: impl FnMut(&TimeGrid, &mut dyn FnMut(usize, &[f64])) -> Result<()>,
) -> Result<(Path, PullbackDiag)> {
    let starts = start_indices(model, view, opts)?;
    let dt = view.dt();
    let l0 = view.lattice_start();
    let x0 = model.pullback_start();
    let t_view = view.t_start();

    let mut horizons = Vec::with_capacity(starts.len());
    let mut gaps = Vec::new();
    let mut contraction_rates = Vec::new();
    let mut prev: Option<Run> = None;
    for (j, &s) in starts.iter().enumerate() {
        let grid = extended_grid(view, s)?;
        let extra = (l0 - s) as usize;
        let probe = j.checked_sub(1).map(|p| (starts[p] - s) as usize);
        let cur = record(extra, probe, |visit| run(&grid, visit))?;
        horizons.push(-(s as f64) * dt);
        if let Some(p) = &prev {
            let gap = sup_gap(model, &cur.view, &p.view);
            let n_prev = horizons[j - 1];
            let span = n_prev + t_view;
            if let Some(at) = &cur.probe {
                let d0 = model.norm_h(&at.iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>());
                if gap > 0.0 && d0 > 0.0 && span > 0.0 {
                    contraction_rates.push((gap / d0).ln() / span);
                }
            }
            gaps.push(gap);
            let k = gaps.len();
            if k >= 2 && gaps[k - 1] >= gaps[k - 2] && gaps[k - 1] >= opts.tol {
                return Err(Error::NonConvergence {
                    detail: format!(
                        "pullback gaps {:?} stopped decreasing at horizon {} (noise too strong or dt too coarse?)",
                        gaps,
                        horizons[j]
                    ),
                    seed,
                });
            }
        }
        prev = Some(cur);
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = gaps
        .iter()
        .zip(&horizons)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, n)| (*n, g.ln()))
        .unzip();
    let fitted_rate = slope(&xs, &ys);
    let converged = gaps.last().is_none_or(|g| *g < opts.tol);
    let path = Path::new(*view, model.dim(), prev.expect("at least one horizon").view)?;
    Ok((
        path,
        PullbackDiag {
            horizons,
            gaps,
            fitted_rate,
            contraction_rates,
            converged,
        },
    ))
}

fn check_eps(model: &ModelSpec, eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise intensity must be ≥ 0, got {eps}"
        )));
    }
    if eps > model.eps0() {
        return Err(Error::Config(format!(
            "eps = {eps} exceeds the configured limit {} for {}",
            model.eps0(),
            model.name()
        )));
    }
    Ok(())
}

/// Pullback approximation of the stationary solution `X*_ε` on `view`, all horizons
/// driven by the realization `seed`.
pub fn pullback_stationary(
    model: &ModelSpec,
    eps: f64,
    seed: u64,
    view: &TimeGrid,
    opts: &PullbackOptions,
) -> Result<(Path, PullbackDiag)> {
    pullback_with_key(model, eps, NoiseKey::new(seed, model.modes()), view, opts)
}

pub(crate) fn pullback_with_key(
    model: &ModelSpec,
    eps: f64,
    key: NoiseKey,
    view: &TimeGrid,
    opts: &PullbackOptions,
) -> Result<(Path, PullbackDiag)> {
    check_eps(model, eps)?;
    let starts = start_indices(model, view, opts)?;
    let longest = extended_grid(view, *starts.last().expect("non-empty"))?;
    let noise = key.sample(&longest)?;
    let x0 = model.pullback_start();
    iterate(model, view, opts, Some(key.seed), |grid, visit| {
        em_run(model, &x0, grid, &noise, eps, opts.blowup, visit)
    })
}

/// Pullback of the controlled equation: the fixed path `X*_v` on `view`. The
/// control is zero outside its own window.
pub fn pullback_skeleton(
    model: &ModelSpec,
    v: &Control,
    view: &TimeGrid,
    opts: &PullbackOptions,
) -> Result<(Path, PullbackDiag)> {
    let x0 = model.pullback_start();
    iterate(model, view, opts, None, |grid, visit| {
        skeleton_run(
            model,
            &x0,
            grid,
            v,
            SkeletonScheme::Heun,
            opts.blowup,
            visit,
        )
    })
}

/// `sup_{t ∈ view} ‖X*(t+s, ω) - X*(t, θ(s)ω)‖_H`. Both runs start at absolute time
/// `-horizon` from the pullback start state; the first uses `ω` on `view + s`, the
/// second the shifted realization on `view`.
pub fn stationarity_check(
    model: &ModelSpec,
    eps: f64,
    seed: u64,
    s: f64,
    view: &TimeGrid,
    horizon: f64,
) -> Result<f64> {
    check_eps(model, eps)?;
    let dt = view.dt();
    let m = (s / dt).round();
    if ((s / dt) - m).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "shift {s} is not a multiple of dt = {dt}"
        )));
    }
    let m = m as i64;
    let shifted_view = TimeGrid::new(
        view.t_start() + m as f64 * dt,
        view.t_end() + m as f64 * dt,
        view.steps(),
    )?;
    let start = (-horizon / dt).round() as i64;
    let key = NoiseKey::new(seed, model.modes());
    let single = |key: NoiseKey, window: &TimeGrid| -> Result<Vec<f64>> {
        if start > window.lattice_start() {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} starts after the window begins at {}",
                window.t_start()
            )));
        }
        let grid = extended_grid(window, start)?;
        let noise = key.sample(&grid)?;
        let extra = (window.lattice_start() - start) as usize;
        let run = record(extra, None, |visit| {
            em_run(
                model,
                &model.pullback_start(),
                &grid,
                &noise,
                eps,
                DEFAULT_BLOWUP,
                visit,
            )
        })?;
        Ok(run.view)
    };
    let a = single(key, &shifted_view)?;
    let b = single(key.shifted(m), view)?;
    Ok(sup_gap(model, &a, &b))
}
