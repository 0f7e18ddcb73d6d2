//! Controls, the discrete action functional and its exact gradient.
//!
//! A path `u_0..u_M` on a uniform grid is inverted step by step at the midpoints:
//!
//! ```text
//! m_i = (u_i + u_{i+1}) / 2
//! r_i = (u_{i+1} - u_i) / dt - drift(m_i, t_i + dt/2)
//! h_{i,k} = ⟨r_i, e_k⟩_H / (c_k b(m_i))
//! S = ½ dt Σ_i Σ_k h_{i,k}²
//! ```
//!
//! The part of `r_i` outside `span(e_1..e_K)` cannot be produced by any control
//! and is reported as a defect.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{check_uniform, read_rows, Path};
use crate::model::{ModelSpec, TimeGrid};

/// Controls whose diffusion factor is smaller than this are treated as non-invertible.
pub const MIN_DIFFUSION: f64 = 1e-10;

/// Defect (L² in time of the out-of-span residual) above which a path is infeasible.
pub const DEFECT_TOL: f64 = 1e-8;

/// Piecewise-constant `H₀` control: one coefficient vector per grid step, read as the
/// value at the step midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    grid: TimeGrid,
    modes: usize,
    coeffs: Vec<f64>,
    sq_norm: f64,
    bound_m: Option<f64>,
}

impl Control {
    pub fn new(
        grid: TimeGrid,
        modes: usize,
        coeffs: Vec<f64>,
        bound_m: Option<f64>,
    ) -> Result<Self> {
        if modes == 0 || coeffs.len() != grid.steps() * modes {
            return Err(Error::InvalidInput(format!(
                "control needs {} coefficients, got {}",
                grid.steps() * modes,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "control contains non-finite values".into(),
            ));
        }
        let sq_norm = grid.dt() * coeffs.iter().map(|c| c * c).sum::<f64>();
        if let Some(m) = bound_m {
            if sq_norm > m {
                return Err(Error::InvalidInput(format!(
                    "control energy {sq_norm} exceeds declared bound {m}"
                )));
            }
        }
        Ok(Self {
            grid,
            modes,
            coeffs,
            sq_norm,
            bound_m,
        })
    }

    pub fn zero(grid: TimeGrid, modes: usize) -> Self {
        Self {
            grid,
            modes,
            coeffs: vec![0.0; grid.steps() * modes],
            sq_norm: 0.0,
            bound_m: None,
        }
    }

    /// Control sampled from `f` at the step midpoints.
    pub fn from_fn(
        grid: TimeGrid,
        modes: usize,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let dt = grid.dt();
        let mut coeffs = Vec::with_capacity(grid.steps() * modes);
        for i in 0..grid.steps() {
            let h = f(grid.time(i) + 0.5 * dt);
            if h.len() != modes {
                return Err(Error::InvalidInput(
                    "control function returned wrong length".into(),
                ));
            }
            coeffs.extend(h);
        }
        Self::new(grid, modes, coeffs, None)
    }

    pub fn with_bound(mut self, m: f64) -> Result<Self> {
        if self.sq_norm > m {
            return Err(Error::InvalidInput(format!(
                "control energy {} exceeds declared bound {m}",
                self.sq_norm
            )));
        }
        self.bound_m = Some(m);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.modes..(i + 1) * self.modes]
    }

    /// `∫‖v‖²_{H₀} dt` by the midpoint rule.
    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn bound_m(&self) -> Option<f64> {
        self.bound_m
    }

    /// Step index of this control corresponding to step 0 of `grid`.
    pub(crate) fn aligned_offset(&self, grid: &TimeGrid) -> Result<i64> {
        if !self.grid.same_spacing(grid) {
            return Err(Error::InvalidInput(format!(
                "control dt {} does not match integration dt {}",
                self.grid.dt(),
                grid.dt()
            )));
        }
        let x = (grid.t_start() - self.grid.t_start()) / grid.dt();
        let off = x.round();
        if (x - off).abs() > 1e-6 {
            return Err(Error::InvalidInput(
                "control grid is not aligned with the integration grid".into(),
            ));
        }
        Ok(off as i64)
    }

    /// Coefficients of control step `i`, or `None` outside the control window.
    pub(crate) fn coeffs_at_offset(&self, i: i64) -> Option<&[f64]> {
        if i < 0 || i as usize >= self.grid.steps() {
            None
        } else {
            Some(self.step(i as usize))
        }
    }

    /// CSV with one row per step: its start time, then the mode coefficients.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for k in 0..self.modes {
            write!(w, ",v{k}")?;
        }
        writeln!(w)?;
        for i in 0..self.grid.steps() {
            write!(w, "{}", self.grid.time(i))?;
            for v in self.step(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Control::write_csv`]; at least two uniformly spaced rows.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Control> {
        let (times, modes, coeffs) = read_rows(r)?;
        if times.len() < 2 {
            return Err(Error::InvalidInput(
                "control needs at least two steps".into(),
            ));
        }
        let dt = times[1] - times[0];
        let steps = times.len();
        let grid = TimeGrid::new(times[0], times[0] + steps as f64 * dt, steps)?;
        check_uniform(&times, &grid)?;
        Control::new(grid, modes, coeffs, None)
    }

    /// `(∫‖self - other‖²)^{1/2}` on a common grid.
    pub fn l2_distance(&self, other: &Control) -> f64 {
        let dt = self.grid.dt();
        (dt * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
        .sqrt()
    }
}

/// Value of the discrete action with its per-step breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    /// `½ ∫‖v‖²_{H₀}`.
    pub value: f64,
    /// `(∫‖r - Π r‖²_H)^{1/2}`, the residual no control can produce.
    pub defect: f64,
    pub per_step: Vec<f64>,
    #[serde(skip)]
    pub control: Control,
}

impl ActionReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.defect <= tol
    }

    /// The action, or `+∞` when the defect exceeds `tol`.
    pub fn effective_value(&self, tol: f64) -> f64 {
        if self.is_feasible(tol) {
            self.value
        } else {
            f64::INFINITY
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "value": self.value,
            "defect": self.defect,
            "per_step": self.per_step,
        })
    }
}

struct Workspace {
    mid: Vec<f64>,
    res: Vec<f64>,
    proj: Vec<f64>,
    tmp: Vec<f64>,
    gr: Vec<f64>,
    gb: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, k: usize) -> Self {
        Self {
            mid: vec![0.0; d],
            res: vec![0.0; d],
            proj: vec![0.0; k],
            tmp: vec![0.0; d],
            gr: vec![0.0; d],
            gb: vec![0.0; d],
        }
    }
}

/// Midpoint state and residual of step `i`; returns `b(m_i)`.
fn residual(
    model: &ModelSpec,
    grid: &TimeGrid,
    u: &[f64],
    i: usize,
    ws: &mut Workspace,
) -> Result<f64> {
    let d = model.dim();
    let dt = grid.dt();
    let (a, b) = (&u[i * d..(i + 1) * d], &u[(i + 1) * d..(i + 2) * d]);
    for j in 0..d {
        ws.mid[j] = 0.5 * (a[j] + b[j]);
    }
    model.drift_into(&ws.mid, grid.time(i) + 0.5 * dt, &mut ws.tmp);
    for j in 0..d {
        ws.res[j] = (b[j] - a[j]) / dt - ws.tmp[j];
    }
    model.project_modes_into(&ws.res, &mut ws.proj);
    let bf = model.diffusion_factor(&ws.mid);
    if !(bf.abs() >= MIN_DIFFUSION) {
        return Err(Error::NonInvertibleDiffusion {
            step: i,
            detail: format!("|b(u)| = {:e} below {MIN_DIFFUSION:e}", bf.abs()),
        });
    }
    let scale = 1.0 + model.norm_h(&ws.res);
    for (k, (&p, &c)) in ws.proj.iter().zip(model.noise_coeffs()).enumerate() {
        if c == 0.0 && p.abs() > 1e-12 * scale {
            return Err(Error::NonInvertibleDiffusion {
                step: i,
                detail: format!(
                    "residual has component {p:e} on mode {} with c_k = 0",
                    k + 1
                ),
            });
        }
    }
    Ok(bf)
}

fn check_path(model: &ModelSpec, u: &Path) -> Result<()> {
    if u.dim() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "path dimension {} does not match model {} ({})",
            u.dim(),
            model.name(),
            model.dim()
        )));
    }
    Ok(())
}

fn invert(model: &ModelSpec, u: &Path) -> Result<ActionReport> {
    check_path(model, u)?;
    let grid = *u.grid();
    let dt = grid.dt();
    let d = model.dim();
    let kk = model.modes();
    let mut ws = Workspace::new(d, kk);
    let mut coeffs = Vec::with_capacity(grid.steps() * kk);
    let mut per_step = Vec::with_capacity(grid.steps());
    let mut defect_sq = 0.0;
    let spans = model.noise_spans_state();
    for i in 0..grid.steps() {
        let bf = residual(model, &grid, u.values(), i, &mut ws)?;
        let mut e = 0.0;
        for (&p, &c) in ws.proj.iter().zip(model.noise_coeffs()) {
            let h = if c == 0.0 { 0.0 } else { p / (c * bf) };
            e += h * h;
            coeffs.push(h);
        }
        per_step.push(0.5 * dt * e);
        if !spans {
            ws.tmp.copy_from_slice(&ws.res);
            for (k, &p) in ws.proj.iter().enumerate() {
                for (t, ek) in ws.tmp.iter_mut().zip(model.noise_mode(k)) {
                    *t -= p * ek;
                }
            }
            defect_sq += dt * model.norm_h_sq(&ws.tmp);
        }
    }
    let control = Control::new(grid, kk, coeffs, None)?;
    Ok(ActionReport {
        value: 0.5 * control.sq_norm(),
        defect: defect_sq.sqrt(),
        per_step,
        control,
    })
}

/// The control `v = B(u)⁻¹(u̇ - Au - F(u) - g)` evaluated at step midpoints.
pub fn control_from_path(model: &ModelSpec, u: &Path) -> Result<Control> {
    invert(model, u).map(|r| r.control)
}

/// `S(u) = ½ ∫‖v‖²_{H₀}` with `v` recovered from `u`.
pub fn action(model: &ModelSpec, u: &Path) -> Result<ActionReport> {
    let r = invert(model, u)?;
    if !r.is_feasible(DEFECT_TOL) {
        log::warn!(
            "path is not reachable by controls in the retained modes (defect {:e})",
            r.defect
        );
    }
    Ok(r)
}

/// Action value and its gradient with respect to every node of `u` (flat, node-major).
pub(crate) fn value_and_gradient(
    model: &ModelSpec,
    grid: &TimeGrid,
    u: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    let d = model.dim();
    let dt = grid.dt();
    let w = model.weight();
    let mut ws = Workspace::new(d, model.modes());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for i in 0..grid.steps() {
        let bf = residual(model, grid, u, i, &mut ws)?;
        let b2 = bf * bf;
        let mut q = 0.0;
        ws.gr.iter_mut().for_each(|g| *g = 0.0);
        for (k, (&p, &c)) in ws.proj.iter().zip(model.noise_coeffs()).enumerate() {
            if c == 0.0 {
                continue;
            }
            q += (p / c) * (p / c);
            let f = dt * w * p / (c * c * b2);
            for (g, e) in ws.gr.iter_mut().zip(model.noise_mode(k)) {
                *g += f * e;
            }
        }
        let s = 0.5 * dt * q / b2;
        value += s;
        // d/dm of the step term: -J(m)ᵀ g_r + (∂s/∂b) ∇b(m)
        model.drift_vjp_into(&ws.mid, &ws.gr, &mut ws.tmp);
        let has_gb = model.diffusion_factor_grad_into(&ws.mid, &mut ws.gb);
        let ds_db = -2.0 * s / bf;
        for j in 0..d {
            let mut gm = -ws.tmp[j];
            if has_gb {
                gm += ds_db * ws.gb[j];
            }
            grad[i * d + j] += -ws.gr[j] / dt + 0.5 * gm;
            grad[(i + 1) * d + j] += ws.gr[j] / dt + 0.5 * gm;
        }
    }
    Ok(value)
}

/// Exact gradient of the discrete action with respect to the path nodes. Entries of
/// a pinned endpoint are zero.
pub fn action_gradient(
    model: &ModelSpec,
    u: &Path,
    fixed_endpoints: (bool, bool),
) -> Result<Vec<f64>> {
    check_path(model, u)?;
    let mut g = vec![0.0; u.values().len()];
    value_and_gradient(model, u.grid(), u.values(), &mut g)?;
    let d = model.dim();
    if fixed_endpoints.0 {
        g[..d].iter_mut().for_each(|x| *x = 0.0);
    }
    if fixed_endpoints.1 {
        let n = g.len();
        g[n - d..].iter_mut().for_each(|x| *x = 0.0);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_path_on_periodic_needs_the_forcing_back() {
        let m = ModelSpec::periodic1d();
        let g = TimeGrid::with_dt(0.0, 1.0, 1e-3).unwrap();
        let u = Path::from_fn(g, 1, |_| vec![0.0]).unwrap();
        let r = action(&m, &u).unwrap();
        assert!((r.control.sq_norm() - 0.045).abs() < 1e-9);
        assert!((r.value - 0.0225).abs() < 1e-9);
        let v = r.control.step(250)[0];
        assert!((v + 0.3 * (2.0 * PI * 0.2505).sin()).abs() < 1e-12);
    }

    #[test]
    fn ou_reversed_flow_action() {
        let m = ModelSpec::ou(1.0).unwrap();
        let g = TimeGrid::with_dt(-5.0, 0.0, 1e-3).unwrap();
        let u = Path::from_fn(g, 1, |t| vec![t.exp()]).unwrap();
        let r = action(&m, &u).unwrap();
        assert!(
            (r.value - (1.0 - (-10f64).exp())).abs() < 1e-5,
            "{}",
            r.value
        );
        assert_eq!(r.defect, 0.0);
    }

    #[test]
    fn control_csv_round_trip() {
        let g = TimeGrid::new(-1.0, 0.5, 6).unwrap();
        let v = Control::from_fn(g, 2, |t| vec![t, -2.0 * t]).unwrap();
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let back = Control::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.coeffs(), v.coeffs());
        assert!((back.grid().t_end() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn control_bound_is_enforced() {
        let g = TimeGrid::with_dt(0.0, 1.0, 0.1).unwrap();
        let v = Control::from_fn(g, 1, |_| vec![2.0]).unwrap();
        assert!((v.sq_norm() - 4.0).abs() < 1e-12);
        assert!(v.clone().with_bound(3.0).is_err());
        assert!(v.with_bound(4.5).is_ok());
    }

    #[test]
    fn radial_diffusion_vanishing_is_non_invertible() {
        let m = ModelSpec::hopf_radial(1.0).unwrap();
        let g = TimeGrid::with_dt(0.0, 1.0, 0.1).unwrap();
        let u = Path::from_fn(g, 1, |_| vec![0.0]).unwrap();
        assert!(matches!(
            action(&m, &u),
            Err(Error::NonInvertibleDiffusion { .. })
        ));
    }

    #[test]
    fn burgers_out_of_span_residual_is_a_defect() {
        let m = ModelSpec::burgers1d(16, 4, 1.0, true).unwrap();
        let gr = m.burgers_grid().unwrap();
        let g = TimeGrid::with_dt(0.0, 0.01, 0.001).unwrap();
        // mode 9 moves with time but is not a noise mode
        let u = Path::from_fn(g, 16, |t| {
            (0..16).map(|i| t * (9.0 * PI * gr.node(i)).sin()).collect()
        })
        .unwrap();
        let r = action(&m, &u).unwrap();
        assert!(!r.is_feasible(DEFECT_TOL));
        assert_eq!(r.effective_value(DEFECT_TOL), f64::INFINITY);
    }

    #[test]
    fn report_json_shape() {
        let m = ModelSpec::ou(1.0).unwrap();
        let g = TimeGrid::with_dt(0.0, 1.0, 0.5).unwrap();
        let u = Path::from_fn(g, 1, |t| vec![t]).unwrap();
        let j = action(&m, &u).unwrap().to_json();
        assert!(j["value"].is_number());
        assert_eq!(j["per_step"].as_array().unwrap().len(), 2);
    }
}
