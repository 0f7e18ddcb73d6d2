//! Time steppers: Euler–Maruyama for the SDE, Heun for the controlled skeleton equation.

use std::io::{BufRead, Write};

use crate::action::Control;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, TimeGrid};
use crate::noise::NoisePath;

/// Default bound on `‖x‖_H` beyond which integration aborts.
pub const DEFAULT_BLOWUP: f64 = 1e6;

/// A trajectory: `steps + 1` states of length `dim`, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    states: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.len() != (grid.steps() + 1) * dim {
            return Err(Error::InvalidInput(format!(
                "path needs {} values for {} nodes of dimension {dim}, got {}",
                (grid.steps() + 1) * dim,
                grid.steps() + 1,
                states.len()
            )));
        }
        if states.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "path contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, dim, states })
    }

    /// Path from a function of time evaluated at the grid nodes.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut states = Vec::with_capacity((grid.steps() + 1) * dim);
        for t in grid.times() {
            let x = f(t);
            if x.len() != dim {
                return Err(Error::InvalidInput(
                    "state function returned wrong length".into(),
                ));
            }
            states.extend(x);
        }
        Self::new(grid, dim, states)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn state_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    /// Flat node-major storage.
    pub fn values(&self) -> &[f64] {
        &self.states
    }

    /// State at a node time, if `t` lies on the grid.
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.grid.index_of(t).map(|i| self.state(i))
    }

    /// The sub-path on `window`, which must be aligned with this grid.
    pub fn restrict(&self, window: &TimeGrid) -> Result<Path> {
        if !self.grid.same_spacing(window) {
            return Err(Error::InvalidInput(
                "window spacing differs from path spacing".into(),
            ));
        }
        let i0 = self.grid.index_of(window.t_start()).ok_or_else(|| {
            Error::Range(format!(
                "window start {} not on the path grid",
                window.t_start()
            ))
        })?;
        if i0 + window.steps() > self.grid.steps() {
            return Err(Error::Range(
                "window extends past the end of the path".into(),
            ));
        }
        let states = self.states[i0 * self.dim..(i0 + window.steps() + 1) * self.dim].to_vec();
        Ok(Path {
            grid: *window,
            dim: self.dim,
            states,
        })
    }

    /// `sup_i ‖self_i - other_i‖_H` over nodes.
    pub fn sup_distance(&self, other: &Path, model: &ModelSpec) -> f64 {
        let mut diff = vec![0.0; self.dim];
        (0..self.len().min(other.len()))
            .map(|i| {
                for (d, (a, b)) in diff
                    .iter_mut()
                    .zip(self.state(i).iter().zip(other.state(i)))
                {
                    *d = a - b;
                }
                model.norm_h(&diff)
            })
            .fold(0.0, f64::max)
    }

    /// CSV with column 0 time and columns `1..=dim` the state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for j in 0..self.dim {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{}", self.grid.time(i))?;
            for x in self.state(i) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Path::write_csv`]; times must be uniformly spaced.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Path> {
        let (times, dim, states) = read_rows(r)?;
        if times.len() < 2 {
            return Err(Error::InvalidInput("path needs at least two nodes".into()));
        }
        let grid = TimeGrid::new(times[0], *times.last().unwrap(), times.len() - 1)?;
        check_uniform(&times, &grid)?;
        Path::new(grid, dim, states)
    }
}

/// Rows of `t,x0,x1,...` with an optional header line; returns times, width and values.
pub(crate) fn read_rows<R: BufRead>(r: R) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dim = None;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with('t')) {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("line {}: {e}", n + 1)))?;
        if vals.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "line {}: need time and values",
                n + 1
            )));
        }
        match dim {
            None => dim = Some(vals.len() - 1),
            Some(d) if d != vals.len() - 1 => {
                return Err(Error::InvalidInput(format!("line {}: ragged row", n + 1)))
            }
            _ => {}
        }
        times.push(vals[0]);
        values.extend_from_slice(&vals[1..]);
    }
    let dim = dim.ok_or_else(|| Error::InvalidInput("empty csv file".into()))?;
    Ok((times, dim, values))
}

pub(crate) fn check_uniform(times: &[f64], grid: &TimeGrid) -> Result<()> {
    for (i, t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-6 * grid.dt() {
            return Err(Error::InvalidInput(format!("non-uniform time at row {i}")));
        }
    }
    Ok(())
}

/// Scheme used by [`integrate_skeleton_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkeletonScheme {
    /// Explicit trapezoidal predictor–corrector.
    #[default]
    Heun,
    /// Forward Euler; with a zero control this matches zero-noise Euler–Maruyama exactly.
    Euler,
}

fn check_stability(model: &ModelSpec, dt: f64) -> Result<()> {
    if let Some(g) = model.burgers_grid() {
        let limit = g.dx * g.dx / 2.0;
        if dt > limit {
            return Err(Error::Config(format!(
                "dt = {dt:e} exceeds the explicit diffusion limit dx²/2 = {limit:e}"
            )));
        }
    }
    Ok(())
}

fn guard(model: &ModelSpec, x: &[f64], step: usize, t: f64, blowup: f64) -> Result<()> {
    let norm = model.norm_h(x);
    if !norm.is_finite() || norm > blowup {
        return Err(Error::Divergence {
            step,
            time: t,
            norm,
        });
    }
    Ok(())
}

/// Euler–Maruyama with the default blow-up bound.
pub fn em_step_sde(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    eps: f64,
) -> Result<Path> {
    em_step_sde_with(model, x0, grid, noise, eps, DEFAULT_BLOWUP)
}

/// `x_{i+1} = x_i + dt·drift(x_i, t_i) + √ε b(x_i) Σ_k c_k ΔW_k(i) e_k`.
pub fn em_step_sde_with(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    eps: f64,
    blowup: f64,
) -> Result<Path> {
    let mut states = Vec::with_capacity((grid.steps() + 1) * model.dim());
    em_run(model, x0, grid, noise, eps, blowup, |_, x| {
        states.extend_from_slice(x)
    })?;
    Path::new(*grid, model.dim(), states)
}

/// Euler–Maruyama that hands every node `(index, state)` to `visit` instead of storing it.
pub(crate) fn em_run(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoisePath,
    eps: f64,
    blowup: f64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    model.check_state(x0, "initial state")?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise intensity must be ≥ 0, got {eps}"
        )));
    }
    if noise.modes() != model.modes() {
        return Err(Error::InvalidInput(format!(
            "noise has {} modes, model {} has {}",
            noise.modes(),
            model.name(),
            model.modes()
        )));
    }
    check_stability(model, grid.dt())?;
    let off = noise.offset_of(grid)?;
    let d = model.dim();
    let dt = grid.dt();
    let s = eps.sqrt();
    let mut x = x0.to_vec();
    let mut f = vec![0.0; d];
    let mut nf = vec![0.0; d];
    visit(0, &x);
    for i in 0..grid.steps() {
        model.drift_into(&x, grid.time(i), &mut f);
        let sb = if s > 0.0 {
            model.noise_field_into(noise.step(off + i), &mut nf);
            s * model.diffusion_factor(&x)
        } else {
            nf.iter_mut().for_each(|v| *v = 0.0);
            0.0
        };
        for j in 0..d {
            x[j] = x[j] + dt * f[j] + sb * nf[j];
        }
        guard(model, &x, i + 1, grid.time(i + 1), blowup)?;
        visit(i + 1, &x);
    }
    Ok(())
}

/// Heun integration of `u' = Au + F(u) + g(t) + B(u) v(t)`.
pub fn integrate_skeleton(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    v: &Control,
) -> Result<Path> {
    integrate_skeleton_with(model, x0, grid, v, SkeletonScheme::Heun, DEFAULT_BLOWUP)
}

/// Skeleton integration with an explicit scheme and blow-up bound. The control is
/// piecewise constant per step and zero outside its own window.
pub fn integrate_skeleton_with(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    v: &Control,
    scheme: SkeletonScheme,
    blowup: f64,
) -> Result<Path> {
    let mut states = Vec::with_capacity((grid.steps() + 1) * model.dim());
    skeleton_run(model, x0, grid, v, scheme, blowup, |_, x| {
        states.extend_from_slice(x)
    })?;
    Path::new(*grid, model.dim(), states)
}

pub(crate) fn skeleton_run(
    model: &ModelSpec,
    x0: &[f64],
    grid: &TimeGrid,
    v: &Control,
    scheme: SkeletonScheme,
    blowup: f64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    model.check_state(x0, "initial state")?;
    if v.modes() != model.modes() {
        return Err(Error::InvalidInput(format!(
            "control has {} modes, model {} has {}",
            v.modes(),
            model.name(),
            model.modes()
        )));
    }
    check_stability(model, grid.dt())?;
    let lookup = v.aligned_offset(grid)?;
    let d = model.dim();
    let dt = grid.dt();
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut nf = vec![0.0; d];
    let mut pred = vec![0.0; d];
    visit(0, &x);
    for i in 0..grid.steps() {
        let t = grid.time(i);
        let h = v.coeffs_at_offset(lookup + i as i64);
        match h {
            Some(h) => model.noise_field_into(h, &mut nf),
            None => nf.iter_mut().for_each(|e| *e = 0.0),
        }
        model.drift_into(&x, t, &mut k1);
        let b1 = if h.is_some() {
            model.diffusion_factor(&x)
        } else {
            0.0
        };
        for j in 0..d {
            k1[j] += b1 * nf[j];
        }
        match scheme {
            SkeletonScheme::Euler => {
                for j in 0..d {
                    x[j] += dt * k1[j];
                }
            }
            SkeletonScheme::Heun => {
                for j in 0..d {
                    pred[j] = x[j] + dt * k1[j];
                }
                model.drift_into(&pred, grid.time(i + 1), &mut k2);
                let b2 = if h.is_some() {
                    model.diffusion_factor(&pred)
                } else {
                    0.0
                };
                for j in 0..d {
                    k2[j] += b2 * nf[j];
                    x[j] += 0.5 * dt * (k1[j] + k2[j]);
                }
            }
        }
        guard(model, &x, i + 1, grid.time(i + 1), blowup)?;
        visit(i + 1, &x);
    }
    Ok(())
}

/// Upper bound `‖x₀‖² + D²M/δ`, `δ = λC₁`, on `sup_t ‖u(t)‖²_H` for controls with
/// `∫‖v‖²_{H₀} ≤ M`. Only defined for autonomous models whose dissipativity holds
/// globally.
pub fn priori_bound(model: &ModelSpec, x0: &[f64], m: f64) -> Option<f64> {
    if !model.satisfies_hypothesis_globally() || !model.is_autonomous() {
        return None;
    }
    let delta = model.constants().lambda * model.constants().c1;
    let d = model.big_d();
    Some(model.norm_h_sq(x0) + d * d * m / delta)
}
