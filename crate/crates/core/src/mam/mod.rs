//! Minimum action method: minimize the discrete action over paths on `[-T, 0]`
//! pinned at the stable equilibrium and a target state, and continue in `T` to
//! approach the quasi-potential.

mod lbfgs;

use serde::{Deserialize, Serialize};

use crate::action::value_and_gradient;
use crate::error::{Error, Result};
use crate::integrate::Path;
use crate::model::{ModelSpec, TimeGrid};

/// Initial path for a minimization.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Straight line from the equilibrium to the target.
    #[default]
    Linear,
    /// `u̇ = -Aᵀu` integrated backwards from the target, for linear models.
    ReversedFlow,
    /// A given path on the minimization grid; its end points are overwritten by the pins.
    Path(Path),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MamOptions {
    pub memory: usize,
    /// Stop once the sup-norm of the gradient over interior nodes is below this.
    pub gtol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for MamOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            gtol: 1e-6,
            max_iter: 5000,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MamResult {
    pub path: Path,
    pub value: f64,
    pub iterations: usize,
    pub grad_sup: f64,
    /// `false` when the iteration limit was reached first.
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QPResult {
    pub target_x: Vec<f64>,
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
    pub converged_value: f64,
    pub converged: bool,
    pub iterations: Vec<usize>,
    #[serde(skip)]
    pub path: Path,
}

impl QPResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("result serializes")
    }
}

fn check_model(model: &ModelSpec, x: &[f64]) -> Result<()> {
    if !model.is_autonomous() {
        return Err(Error::Config(format!(
            "{} has time-dependent forcing; the quasi-potential is defined for autonomous models only",
            model.name()
        )));
    }
    if !model.noise_spans_state() {
        return Err(Error::Config(format!(
            "{} drives only {} of {} directions; use as many noise modes as grid points",
            model.name(),
            model.modes(),
            model.dim()
        )));
    }
    model.check_state(x, "target")
}

/// Approximate inverse of the leading Hessian. In the noise-mode coordinates
/// `a_k = e_kᵀu` the action is close to `Σ_k (1/(2 dt c_k² b̄²)) aᵀ(L + (κ_k dt)² I)a` with
/// `L` the Dirichlet second difference in time and `κ_k = ‖Jᵀe_k‖/‖e_k‖` from the drift
/// Jacobian at the equilibrium. For the Burgers sine modes `κ_k` is the Laplacian eigenvalue.
struct Preconditioner {
    dim: usize,
    nodes: usize,
    dt: f64,
    /// `b̄² c_k²` per mode.
    scale: Vec<f64>,
    diag: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl Preconditioner {
    fn new(model: &ModelSpec, nodes: usize, dt: f64, x: &[f64]) -> Self {
        let d = model.dim();
        let eq = model.equilibrium();
        let mid: Vec<f64> = eq.iter().zip(x).map(|(a, b)| 0.5 * (a + b)).collect();
        let b = model.diffusion_factor(&mid).abs().max(1e-3);
        let mut col = vec![0.0; d];
        let mut scale = Vec::new();
        let mut diag = Vec::new();
        let mut basis = Vec::new();
        for k in 0..model.modes() {
            let e = model.noise_mode(k).to_vec();
            model.drift_vjp_into(eq, &e, &mut col);
            let kappa2 =
                col.iter().map(|v| v * v).sum::<f64>() / e.iter().map(|v| v * v).sum::<f64>();
            scale.push((model.noise_coeffs()[k] * b).powi(2));
            diag.push(2.0 + kappa2 * dt * dt);
            basis.push(e);
        }
        Self {
            dim: d,
            nodes,
            dt,
            scale,
            diag,
            basis,
        }
    }

    fn apply(&self, g: &[f64], out: &mut [f64]) {
        let (d, n) = (self.dim, self.nodes);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        for (k, e) in self.basis.iter().enumerate() {
            for i in 0..n {
                a[i] = self.dt
                    * self.scale[k]
                    * e.iter()
                        .zip(&g[i * d..(i + 1) * d])
                        .map(|(x, y)| x * y)
                        .sum::<f64>();
            }
            // Thomas algorithm for tridiag(-1, diag_k, -1)
            let mut prev_c = 0.0;
            let mut prev_y = 0.0;
            for i in 0..n {
                let m = self.diag[k] + prev_c;
                c[i] = -1.0 / m;
                a[i] = (a[i] + prev_y) / m;
                prev_c = c[i];
                prev_y = a[i];
            }
            for i in (0..n.saturating_sub(1)).rev() {
                a[i] -= c[i] * a[i + 1];
            }
            for i in 0..n {
                for (o, ej) in out[i * d..(i + 1) * d].iter_mut().zip(e) {
                    *o += a[i] * ej;
                }
            }
        }
    }
}

fn reversed_flow(model: &ModelSpec, grid: &TimeGrid, x: &[f64]) -> Result<Vec<f64>> {
    let a = model.linear_matrix().ok_or_else(|| {
        Error::Config(format!(
            "the reversed-flow initializer needs a linear model, {} is not",
            model.name()
        ))
    })?;
    let d = model.dim();
    let n = grid.steps();
    let dt = grid.dt();
    // u' = -Aᵀu, so going back one step is one RK4 step of w' = Aᵀw.
    let rhs = |u: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| (0..d).map(|j| a[j * d + i] * u[j]).sum())
            .collect()
    };
    let mut u = vec![0.0; (n + 1) * d];
    u[n * d..].copy_from_slice(x);
    for i in (0..n).rev() {
        let cur = u[(i + 1) * d..(i + 2) * d].to_vec();
        let k1 = rhs(&cur);
        let p: Vec<f64> = (0..d).map(|j| cur[j] + 0.5 * dt * k1[j]).collect();
        let k2 = rhs(&p);
        let p: Vec<f64> = (0..d).map(|j| cur[j] + 0.5 * dt * k2[j]).collect();
        let k3 = rhs(&p);
        let p: Vec<f64> = (0..d).map(|j| cur[j] + dt * k3[j]).collect();
        let k4 = rhs(&p);
        for j in 0..d {
            u[i * d + j] = cur[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(u)
}

/// Minimize the discrete action over paths on `[-T, 0]` with `steps` steps, pinned at the
/// equilibrium at `-T` and at `x_target` at `0`.
pub fn minimize_action(
    model: &ModelSpec,
    x_target: &[f64],
    horizon: f64,
    steps: usize,
    init: &Init,
    opts: &MamOptions,
) -> Result<MamResult> {
    check_model(model, x_target)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidInput(
            "minimization needs at least two steps".into(),
        ));
    }
    if opts.memory == 0 || opts.max_iter == 0 || !(opts.gtol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "invalid optimizer settings {opts:?}"
        )));
    }
    let grid = TimeGrid::new(-horizon, 0.0, steps)?;
    let d = model.dim();
    let eq = model.equilibrium().to_vec();
    let mut u = match init {
        Init::Linear => {
            let mut u = Vec::with_capacity((steps + 1) * d);
            for i in 0..=steps {
                let s = i as f64 / steps as f64;
                u.extend(eq.iter().zip(x_target).map(|(a, b)| a + s * (b - a)));
            }
            u
        }
        Init::ReversedFlow => reversed_flow(model, &grid, x_target)?,
        Init::Path(p) => {
            if p.dim() != d || p.grid().steps() != steps || !p.grid().same_spacing(&grid) {
                return Err(Error::InvalidInput(
                    "initial path does not live on the minimization grid".into(),
                ));
            }
            p.values().to_vec()
        }
    };
    u[..d].copy_from_slice(&eq);
    u[steps * d..].copy_from_slice(x_target);

    let nodes = steps - 1;
    let pre = Preconditioner::new(model, nodes, grid.dt(), x_target);
    let mut full = u.clone();
    let mut gfull = vec![0.0; u.len()];
    // surface inversion errors at the starting path
    value_and_gradient(model, &grid, &full, &mut gfull)?;
    let settings = lbfgs::Settings {
        memory: opts.memory,
        gtol: opts.gtol,
        max_iter: opts.max_iter,
        max_backtracks: opts.max_backtracks,
    };
    let rep = lbfgs::minimize(
        u[d..steps * d].to_vec(),
        settings,
        |x, g| {
            full[d..steps * d].copy_from_slice(x);
            let v = value_and_gradient(model, &grid, &full, &mut gfull).ok()?;
            g.copy_from_slice(&gfull[d..steps * d]);
            Some(v)
        },
        |g, out| pre.apply(g, out),
    );
    u[d..steps * d].copy_from_slice(&rep.x);
    let path = Path::new(grid, d, u)?;
    match rep.outcome {
        lbfgs::Outcome::Stalled => Err(Error::Stalled {
            iterations: rep.iterations,
            value: rep.value,
            best: Box::new(path),
        }),
        outcome => {
            let converged = outcome == lbfgs::Outcome::Converged;
            if !converged {
                log::warn!(
                    "action minimization hit {} iterations with gradient {:e}",
                    rep.iterations,
                    rep.grad_sup
                );
            }
            Ok(MamResult {
                path,
                value: rep.value,
                iterations: rep.iterations,
                grad_sup: rep.grad_sup,
                converged,
            })
        }
    }
}

/// Default horizon schedule `{5, 10, 20, 40}/(λC₁)`.
pub fn default_schedule(model: &ModelSpec) -> Vec<f64> {
    let unit = 1.0 / model.relaxation_rate();
    [5.0, 10.0, 20.0, 40.0].iter().map(|m| m * unit).collect()
}

/// `V(x)` by horizon continuation: minimize on each `T` in turn, warm-starting from the
/// previous minimizer padded with the equilibrium on the left.
pub fn quasipotential(
    model: &ModelSpec,
    x: &[f64],
    schedule: &[f64],
    steps_per_unit: f64,
    tol: f64,
    opts: &MamOptions,
) -> Result<QPResult> {
    check_model(model, x)?;
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "horizon schedule must be increasing, got {schedule:?}"
        )));
    }
    if !(steps_per_unit > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput(
            "steps per unit time and tolerance must be positive".into(),
        ));
    }
    let dt = 1.0 / steps_per_unit;
    let d = model.dim();
    let eq = model.equilibrium();
    let mut horizons = Vec::new();
    let mut values = Vec::new();
    let mut iterations = Vec::new();
    let mut prev: Option<Path> = None;
    for &t in schedule {
        let steps = ((t / dt).round() as usize).max(2);
        let horizon = steps as f64 * dt;
        let init = match &prev {
            None => Init::Linear,
            Some(p) => {
                let pad = steps.saturating_sub(p.grid().steps());
                let mut u = Vec::with_capacity((steps + 1) * d);
                for i in 0..=steps {
                    if i < pad {
                        u.extend_from_slice(eq);
                    } else {
                        u.extend_from_slice(p.state(i - pad));
                    }
                }
                Init::Path(Path::new(TimeGrid::new(-horizon, 0.0, steps)?, d, u)?)
            }
        };
        let r = minimize_action(model, x, horizon, steps, &init, opts)?;
        log::info!(
            "T = {horizon}: action {} after {} iterations",
            r.value,
            r.iterations
        );
        horizons.push(horizon);
        values.push(r.value);
        iterations.push(r.iterations);
        prev = Some(r.path);
    }
    let slack = |v: f64| 1e-6 * (1.0 + v.abs());
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + slack(w[0]));
    if !monotone {
        log::warn!(
            "minimized actions {values:?} increase with the horizon; the optimizer may be trapped"
        );
    }
    let last = *values.last().expect("non-empty schedule");
    let settled =
        values.len() >= 2 && (values[values.len() - 1] - values[values.len() - 2]).abs() < tol;
    Ok(QPResult {
        target_x: x.to_vec(),
        horizons,
        values,
        converged_value: last,
        converged: monotone && settled,
        iterations,
        path: prev.expect("non-empty schedule"),
    })
}
