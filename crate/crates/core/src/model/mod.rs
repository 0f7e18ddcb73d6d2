//! Model contract `dX = (AX + F(X) + g(t)) dt + √ε B(X) dW` and the shipped instances.
//!
//! Every instance uses a scalar diffusion factor, `B(u) h = b(u) · Σ_k h_k c_k e_k`,
//! where `(c_k, e_k)` are the retained eigenpairs of `Q^{1/2}`. Inner products on the
//! state space carry a weight (`dx` for the Burgers grid, `1` otherwise), so the
//! discrete `H`-norm approximates the continuous one.

mod burgers;
mod grid;
mod hypothesis;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use burgers::BurgersGrid;
pub use grid::TimeGrid;
pub use hypothesis::HypothesisReport;

use crate::error::{Error, Result};

/// The constants `λ, C₀, C₁, β₀, D₀` of the dissipativity and diffusion bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub c0: f64,
    pub c1: f64,
    pub beta0: f64,
    pub d0: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Dynamics {
    /// `A` as a dense row-major matrix, `F = 0`.
    Linear { matrix: Vec<f64> },
    /// `-decay·x + sin x + amplitude·sin(2πt)`.
    Periodic { decay: f64, amplitude: f64 },
    /// `(3/2 - r²) r`.
    HopfRadial,
    /// `Δ_h u + ⅓(u·Du + D(u²))`.
    Burgers(BurgersGrid),
}

/// Scalar factor `b(u)` of the diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Diffusion {
    Identity,
    /// `b(r) = c·r`.
    Radial {
        c: f64,
    },
    /// `b(u) = d0 / (1 + ‖u‖²_H)`.
    Bounded {
        d0: f64,
    },
}

/// Parameter overrides accepted by [`ModelSpec::by_name`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub a: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub c: Option<f64>,
    pub grid: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub d0: Option<f64>,
    pub additive: Option<bool>,
}

/// Names accepted by [`ModelSpec::by_name`].
pub const MODEL_NAMES: [&str; 6] = [
    "ou",
    "periodic1d",
    "linear2d-a1",
    "linear2d-a2",
    "hopf-radial",
    "burgers1d",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    name: String,
    dim: usize,
    dynamics: Dynamics,
    diffusion: Diffusion,
    /// `c_k`, one per retained mode.
    noise_coeffs: Vec<f64>,
    /// `e_k` row-major, `modes × dim`.
    noise_basis: Vec<f64>,
    weight: f64,
    constants: Constants,
    eps0: f64,
    global_hypothesis: bool,
    equilibrium: Vec<f64>,
    sample_box: (f64, f64),
}

fn canonical_basis(dim: usize) -> Vec<f64> {
    let mut b = vec![0.0; dim * dim];
    for k in 0..dim {
        b[k * dim + k] = 1.0;
    }
    b
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!(
            "parameter {name} must be positive, got {v}"
        )))
    }
}

impl ModelSpec {
    /// Ornstein–Uhlenbeck `dx = -a x dt + √ε dB`.
    pub fn ou(a: f64) -> Result<Self> {
        let a = positive("a", a)?;
        Ok(Self {
            name: "ou".into(),
            dim: 1,
            dynamics: Dynamics::Linear { matrix: vec![-a] },
            diffusion: Diffusion::Identity,
            noise_coeffs: vec![1.0],
            noise_basis: vec![1.0],
            weight: 1.0,
            constants: Constants {
                lambda: a,
                c0: 0.0,
                c1: 1.0,
                beta0: 0.0,
                d0: 1.0,
            },
            eps0: 0.5,
            global_hypothesis: true,
            equilibrium: vec![0.0],
            sample_box: (-3.0, 3.0),
        })
    }

    /// `dx = -5x dt + (sin x + 0.3 sin 2πt) dt + √ε dB`.
    pub fn periodic1d() -> Self {
        Self {
            name: "periodic1d".into(),
            dim: 1,
            dynamics: Dynamics::Periodic {
                decay: 5.0,
                amplitude: 0.3,
            },
            diffusion: Diffusion::Identity,
            noise_coeffs: vec![1.0],
            noise_basis: vec![1.0],
            weight: 1.0,
            // -5 + cos ≤ -4
            constants: Constants {
                lambda: 4.0,
                c0: 0.0,
                c1: 1.0,
                beta0: 0.0,
                d0: 1.0,
            },
            eps0: 0.5,
            global_hypothesis: true,
            equilibrium: vec![0.0],
            sample_box: (-3.0, 3.0),
        }
    }

    fn linear2d(name: &str, lambda: f64, beta: f64) -> Result<Self> {
        let lambda = positive("lambda", lambda)?;
        Ok(Self {
            name: name.into(),
            dim: 2,
            dynamics: Dynamics::Linear {
                matrix: vec![-lambda, -beta, beta, -lambda],
            },
            diffusion: Diffusion::Identity,
            noise_coeffs: vec![1.0, 1.0],
            noise_basis: canonical_basis(2),
            weight: 1.0,
            constants: Constants {
                lambda,
                c0: 0.0,
                c1: 1.0,
                beta0: 0.0,
                d0: 1.0,
            },
            eps0: 0.5,
            global_hypothesis: true,
            equilibrium: vec![0.0, 0.0],
            sample_box: (-3.0, 3.0),
        })
    }

    /// `A₁ = -λ I`.
    pub fn linear2d_a1(lambda: f64) -> Result<Self> {
        Self::linear2d("linear2d-a1", lambda, 0.0)
    }

    /// `A₂ = [[-λ, -β], [β, -λ]]`; the rotation part drops out of `⟨A₂w, w⟩`.
    pub fn linear2d_a2(lambda: f64, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Config("parameter beta must be finite".into()));
        }
        Self::linear2d("linear2d-a2", lambda, beta)
    }

    /// Radial Hopf amplitude `dr = (3/2 - r²) r dt + √ε c r dB` (Itô).
    ///
    /// `r = 0` is an unstable equilibrium, so the dissipativity constants hold only on
    /// the band `r ∈ [0.8, 3]` around the stable amplitude `√(3/2)`; pullback runs
    /// start from that amplitude instead of from zero.
    pub fn hopf_radial(c: f64) -> Result<Self> {
        let c = positive("c", c)?;
        let (lo, hi) = (0.8, 3.0);
        Ok(Self {
            name: "hopf-radial".into(),
            dim: 1,
            dynamics: Dynamics::HopfRadial,
            diffusion: Diffusion::Radial { c },
            noise_coeffs: vec![1.0],
            noise_basis: vec![1.0],
            weight: 1.0,
            constants: Constants {
                lambda: 3.0 * lo * lo - 1.5,
                c0: 0.0,
                c1: 1.0,
                beta0: c,
                d0: c * hi,
            },
            eps0: 0.5,
            global_hypothesis: false,
            equilibrium: vec![1.5f64.sqrt()],
            sample_box: (lo, hi),
        })
    }

    /// Burgers on `grid` interior nodes, `modes` sine modes with `c_k = k⁻²`.
    pub fn burgers1d(grid: usize, modes: usize, d0: f64, additive: bool) -> Result<Self> {
        if grid < 3 {
            return Err(Error::Config(format!(
                "burgers grid must be at least 3, got {grid}"
            )));
        }
        if modes == 0 || modes > grid {
            return Err(Error::Config(format!(
                "burgers mode count must be in 1..={grid}, got {modes}"
            )));
        }
        let d0 = positive("d0", d0)?;
        let g = BurgersGrid::new(grid);
        // sup |d/ds 1/(1+s²)| = 3√3/8
        let beta0 = if additive {
            0.0
        } else {
            d0 * 3.0 * 3f64.sqrt() / 8.0
        };
        Ok(Self {
            name: "burgers1d".into(),
            dim: grid,
            dynamics: Dynamics::Burgers(g),
            diffusion: if additive {
                Diffusion::Identity
            } else {
                Diffusion::Bounded { d0 }
            },
            noise_coeffs: (1..=modes).map(|k| 1.0 / (k * k) as f64).collect(),
            noise_basis: g.sine_basis(modes),
            weight: g.dx,
            constants: Constants {
                lambda: 0.5,
                c0: 1.0 / 18.0,
                c1: g.poincare(),
                beta0,
                d0: if additive { 1.0 } else { d0 },
            },
            eps0: 0.1,
            global_hypothesis: true,
            equilibrium: vec![0.0; grid],
            sample_box: (-3.0, 3.0),
        })
    }

    /// Look a model up by its config name, applying overrides.
    pub fn by_name(name: &str, p: &ModelParams) -> Result<Self> {
        let allowed: &[&str] = match name {
            "ou" => &["a"],
            "periodic1d" => &[],
            "linear2d-a1" => &["lambda"],
            "linear2d-a2" => &["lambda", "beta"],
            "hopf-radial" => &["c"],
            "burgers1d" => &["grid", "K", "d0", "additive"],
            other => {
                return Err(Error::Config(format!(
                    "unknown model '{other}' (known: {})",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        let given = [
            ("a", p.a.is_some()),
            ("lambda", p.lambda.is_some()),
            ("beta", p.beta.is_some()),
            ("c", p.c.is_some()),
            ("grid", p.grid.is_some()),
            ("K", p.k.is_some()),
            ("d0", p.d0.is_some()),
            ("additive", p.additive.is_some()),
        ];
        for (key, set) in given {
            if set && !allowed.contains(&key) {
                return Err(Error::Config(format!(
                    "parameter '{key}' does not apply to {name}"
                )));
            }
        }
        match name {
            "ou" => Self::ou(p.a.unwrap_or(1.0)),
            "periodic1d" => Ok(Self::periodic1d()),
            "linear2d-a1" => Self::linear2d_a1(p.lambda.unwrap_or(0.3)),
            "linear2d-a2" => Self::linear2d_a2(p.lambda.unwrap_or(0.3), p.beta.unwrap_or(2.0)),
            "hopf-radial" => Self::hopf_radial(p.c.unwrap_or(1.0)),
            _ => Self::burgers1d(
                p.grid.unwrap_or(64),
                p.k.unwrap_or(16),
                p.d0.unwrap_or(1.0),
                p.additive.unwrap_or(false),
            ),
        }
    }

    /// All six shipped models with default parameters.
    pub fn shipped() -> Vec<Self> {
        MODEL_NAMES
            .iter()
            .map(|n| Self::by_name(n, &ModelParams::default()).expect("defaults are valid"))
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.noise_coeffs.len()
    }

    pub fn noise_coeffs(&self) -> &[f64] {
        &self.noise_coeffs
    }

    /// Mode `k` (zero based) as a state vector.
    pub fn noise_mode(&self, k: usize) -> &[f64] {
        &self.noise_basis[k * self.dim..(k + 1) * self.dim]
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    /// `tr Q = Σ c_k²`.
    pub fn trace_q(&self) -> f64 {
        self.noise_coeffs.iter().map(|c| c * c).sum()
    }

    /// `β = β₀ tr Q`.
    pub fn beta(&self) -> f64 {
        self.constants.beta0 * self.trace_q()
    }

    /// `D = D₀ tr Q`.
    pub fn big_d(&self) -> f64 {
        self.constants.d0 * self.trace_q()
    }

    /// Largest noise level for which pullback runs are attempted.
    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Contraction rate that sets the pullback horizon unit: `λ C₁`, except for the
    /// Hopf amplitude, where it is the linearized rate `3` at `√(3/2)`. The band constant
    /// `λ` there is far more conservative, and horizons built on it drive consecutive
    /// runs to bitwise agreement.
    pub fn relaxation_rate(&self) -> f64 {
        match self.dynamics {
            Dynamics::HopfRadial => 3.0,
            _ => self.constants.lambda * self.constants.c1,
        }
    }

    /// Default time step: `dx²/4` on the Burgers grid, `1e-3` otherwise.
    pub fn default_dt(&self) -> f64 {
        match &self.dynamics {
            Dynamics::Burgers(g) => 0.25 * g.dx * g.dx,
            _ => 1e-3,
        }
    }

    /// Whether the dissipativity constants hold on the whole state space.
    pub fn satisfies_hypothesis_globally(&self) -> bool {
        self.global_hypothesis
    }

    /// The stable equilibrium of the noiseless autonomous flow.
    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    /// Initial state for pullback runs: zero, except where zero is an unstable equilibrium.
    pub fn pullback_start(&self) -> Vec<f64> {
        match self.dynamics {
            Dynamics::HopfRadial => self.equilibrium.clone(),
            _ => vec![0.0; self.dim],
        }
    }

    pub fn is_autonomous(&self) -> bool {
        !matches!(self.dynamics, Dynamics::Periodic { amplitude, .. } if amplitude != 0.0)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.dynamics, Dynamics::Linear { .. })
    }

    /// Dense `A` for linear models.
    pub fn linear_matrix(&self) -> Option<&[f64]> {
        match &self.dynamics {
            Dynamics::Linear { matrix } => Some(matrix),
            _ => None,
        }
    }

    pub fn burgers_grid(&self) -> Option<BurgersGrid> {
        match self.dynamics {
            Dynamics::Burgers(g) => Some(g),
            _ => None,
        }
    }

    /// True when the retained noise modes span the whole state space.
    pub fn noise_spans_state(&self) -> bool {
        self.modes() >= self.dim && self.noise_coeffs.iter().all(|&c| c > 0.0)
    }

    /// Quadrature weight of the discrete `H` inner product.
    pub(crate) fn weight(&self) -> f64 {
        self.weight
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weight * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm_h_sq(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }

    pub fn norm_h(&self, u: &[f64]) -> f64 {
        self.norm_h_sq(u).sqrt()
    }

    /// `‖u‖²_V`: forward-difference gradient norm for Burgers, the `H`-norm otherwise.
    pub fn norm_v_sq(&self, u: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::Burgers(g) => g.v_norm_sq(u),
            _ => self.norm_h_sq(u),
        }
    }

    pub(crate) fn check_state(&self, u: &[f64], what: &str) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{what} has length {} but {} has dimension {}",
                u.len(),
                self.name,
                self.dim
            )));
        }
        Ok(())
    }

    /// `out = A u + F(u)` (no forcing).
    pub(crate) fn autonomous_drift_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            Dynamics::Linear { matrix } => {
                let d = self.dim;
                for i in 0..d {
                    out[i] = (0..d).map(|j| matrix[i * d + j] * u[j]).sum();
                }
            }
            Dynamics::Periodic { decay, .. } => out[0] = -decay * u[0] + u[0].sin(),
            Dynamics::HopfRadial => out[0] = (1.5 - u[0] * u[0]) * u[0],
            Dynamics::Burgers(g) => {
                g.convection_into(u, out);
                let inv = 1.0 / (g.dx * g.dx);
                let n = g.n;
                for i in 0..n {
                    let l = if i > 0 { u[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { u[i + 1] } else { 0.0 };
                    out[i] += (l - 2.0 * u[i] + r) * inv;
                }
            }
        }
    }

    /// `out = A u + F(u) + g(t)`.
    pub(crate) fn drift_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        self.autonomous_drift_into(u, out);
        if let Dynamics::Periodic { amplitude, .. } = self.dynamics {
            out[0] += amplitude * (2.0 * PI * t).sin();
        }
    }

    /// `out = J(u)ᵀ w`, the transposed Jacobian of the drift applied to `w`.
    pub(crate) fn drift_vjp_into(&self, u: &[f64], w: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            Dynamics::Linear { matrix } => {
                let d = self.dim;
                for j in 0..d {
                    out[j] = (0..d).map(|i| matrix[i * d + j] * w[i]).sum();
                }
            }
            Dynamics::Periodic { decay, .. } => out[0] = (-decay + u[0].cos()) * w[0],
            Dynamics::HopfRadial => out[0] = (1.5 - 3.0 * u[0] * u[0]) * w[0],
            Dynamics::Burgers(g) => {
                g.convection_vjp_into(u, w, out);
                let inv = 1.0 / (g.dx * g.dx);
                let n = g.n;
                for i in 0..n {
                    let l = if i > 0 { w[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { w[i + 1] } else { 0.0 };
                    out[i] += (l - 2.0 * w[i] + r) * inv;
                }
            }
        }
    }

    /// `A u + F(u) + g(t)`.
    pub fn drift(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_state(u, "state")?;
        let mut out = vec![0.0; self.dim];
        self.drift_into(u, t, &mut out);
        Ok(out)
    }

    /// `F(u)` alone (the linear part removed).
    pub fn nonlinear(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_state(u, "state")?;
        let mut out = vec![0.0; self.dim];
        match &self.dynamics {
            Dynamics::Linear { .. } => {}
            Dynamics::Periodic { .. } => out[0] = u[0].sin(),
            Dynamics::HopfRadial => out[0] = (1.5 - u[0] * u[0]) * u[0],
            Dynamics::Burgers(g) => g.convection_into(u, &mut out),
        }
        Ok(out)
    }

    /// The scalar diffusion factor `b(u)`.
    pub fn diffusion_factor(&self, u: &[f64]) -> f64 {
        match self.diffusion {
            Diffusion::Identity => 1.0,
            Diffusion::Radial { c } => c * u[0],
            Diffusion::Bounded { d0 } => d0 / (1.0 + self.norm_h_sq(u)),
        }
    }

    /// `out = ∇b(u)`; returns false when `b` is constant.
    pub(crate) fn diffusion_factor_grad_into(&self, u: &[f64], out: &mut [f64]) -> bool {
        match self.diffusion {
            Diffusion::Identity => false,
            Diffusion::Radial { c } => {
                out[0] = c;
                true
            }
            Diffusion::Bounded { d0 } => {
                let s = 1.0 + self.norm_h_sq(u);
                let f = -2.0 * d0 * self.weight / (s * s);
                for (o, x) in out.iter_mut().zip(u) {
                    *o = f * x;
                }
                true
            }
        }
    }

    /// `out = Σ_k h_k c_k e_k`.
    pub(crate) fn noise_field_into(&self, h: &[f64], out: &mut [f64]) {
        if self.weight == 1.0 && self.modes() == self.dim && self.dynamics_is_finite() {
            for k in 0..self.dim {
                out[k] = h[k] * self.noise_coeffs[k];
            }
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, (&hk, &ck)) in h.iter().zip(&self.noise_coeffs).enumerate() {
            let a = hk * ck;
            if a == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(self.noise_mode(k)) {
                *o += a * e;
            }
        }
    }

    fn dynamics_is_finite(&self) -> bool {
        !matches!(self.dynamics, Dynamics::Burgers(_))
    }

    /// `B(u) (Σ_k h_k c_k e_k)`.
    pub fn apply_diffusion(&self, u: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.check_state(u, "state")?;
        if h.len() != self.modes() {
            return Err(Error::InvalidInput(format!(
                "{} noise coefficients given but {} has {} modes",
                h.len(),
                self.name,
                self.modes()
            )));
        }
        let mut out = vec![0.0; self.dim];
        self.noise_field_into(h, &mut out);
        let b = self.diffusion_factor(u);
        out.iter_mut().for_each(|x| *x *= b);
        Ok(out)
    }

    /// `out_k = ⟨r, e_k⟩_H`.
    pub(crate) fn project_modes_into(&self, r: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.inner(r, self.noise_mode(k));
        }
    }

    /// Numerically probe the dissipativity and diffusion bounds on random states.
    pub fn check_hypothesis(&self, n_samples: usize, seed: u64) -> HypothesisReport {
        hypothesis::check(self, n_samples, seed)
    }

    pub(crate) fn sample_box(&self) -> (f64, f64) {
        self.sample_box
    }
}
