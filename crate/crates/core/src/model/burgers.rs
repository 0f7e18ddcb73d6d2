//! Finite-difference discretization of the viscous Burgers operator on (0, 1)
//! with homogeneous Dirichlet ends.
//!
//! The state holds the `n` interior nodes `x_i = (i + 1) dx`, `dx = 1/(n + 1)`.
//! The convective term `u u_x = ½ ∂ₓ(u²)` uses the skew-symmetric split
//! `⅓(u·Du + D(u²))` with the central difference `D`, which gives
//! `Σ_i u_i F_i(u) = 0` for every grid vector.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersGrid {
    pub n: usize,
    pub dx: f64,
}

impl BurgersGrid {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            dx: 1.0 / (n as f64 + 1.0),
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dx
    }

    #[inline]
    fn at(u: &[f64], i: isize) -> f64 {
        if i < 0 || i as usize >= u.len() {
            0.0
        } else {
            u[i as usize]
        }
    }

    /// `out = Δ_h u`.
    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.dx * self.dx);
        for i in 0..self.n {
            let j = i as isize;
            out[i] = (Self::at(u, j - 1) - 2.0 * u[i] + Self::at(u, j + 1)) * inv;
        }
    }

    /// `out = ⅓(u·Du + D(u²))`, written per node as
    /// `(u_{i+1} - u_{i-1})(u_{i-1} + u_i + u_{i+1}) / (6 dx)`.
    pub fn convection_into(&self, u: &[f64], out: &mut [f64]) {
        let s = 1.0 / (6.0 * self.dx);
        for i in 0..self.n {
            let j = i as isize;
            let l = Self::at(u, j - 1);
            let r = Self::at(u, j + 1);
            out[i] = (r - l) * (l + u[i] + r) * s;
        }
    }

    /// `out = J(u)ᵀ w` for the convective term.
    pub fn convection_vjp_into(&self, u: &[f64], w: &[f64], out: &mut [f64]) {
        let s = 1.0 / (6.0 * self.dx);
        for j in 0..self.n {
            let k = j as isize;
            let ul = Self::at(u, k - 1);
            let ur = Self::at(u, k + 1);
            let wl = Self::at(w, k - 1);
            let wr = Self::at(w, k + 1);
            out[j] = (w[j] * (ur - ul) + wl * (2.0 * u[j] + ul) - wr * (2.0 * u[j] + ur)) * s;
        }
    }

    /// Discrete `‖∂ₓu‖²` from forward differences including both boundary cells.
    pub fn v_norm_sq(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..=self.n {
            let j = i as isize;
            let d = Self::at(u, j) - Self::at(u, j - 1);
            acc += d * d;
        }
        acc / self.dx
    }

    /// Smallest eigenvalue of `-Δ_h`, the discrete Poincaré constant.
    pub fn poincare(&self) -> f64 {
        let s = (PI * self.dx / 2.0).sin();
        4.0 * s * s / (self.dx * self.dx)
    }

    /// Sine modes `√2 sin(kπx)`, `k = 1..=modes`, orthonormal in the `dx`-weighted inner product.
    pub fn sine_basis(&self, modes: usize) -> Vec<f64> {
        let mut basis = Vec::with_capacity(modes * self.n);
        for k in 1..=modes {
            for i in 0..self.n {
                basis.push(2f64.sqrt() * (k as f64 * PI * self.node(i)).sin());
            }
        }
        basis
    }
}
