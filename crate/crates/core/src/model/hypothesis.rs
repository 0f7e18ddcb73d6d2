use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelSpec;

/// Worst observed margins of the dissipativity and diffusion bounds. A margin
/// is `lhs - rhs` of an inequality `lhs ≤ rhs`, so non-positive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub n_samples: usize,
    /// `⟨Au - Av + F(u) - F(v), u - v⟩ + λ‖u-v‖²_V - C₀‖u-v‖²_H ‖u‖²_V`
    pub dissipativity: f64,
    /// `⟨Au + F(u) - (Ae + F(e)), u - e⟩ + λ‖u-e‖²_V` about the equilibrium `e`.
    pub coercivity: f64,
    /// `|B(u) - B(v)|_L - β₀‖u-v‖_H`
    pub lipschitz: f64,
    /// `|B(u)|_L - D₀`
    pub bound: f64,
}

impl HypothesisReport {
    pub fn worst(&self) -> f64 {
        self.dissipativity
            .max(self.coercivity)
            .max(self.lipschitz)
            .max(self.bound)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

fn random_state(m: &ModelSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = m.sample_box();
    match m.burgers_grid() {
        Some(g) if rng.gen_bool(0.5) => {
            let modes = g.n.min(16);
            let basis = g.sine_basis(modes);
            let mut u = vec![0.0; g.n];
            for k in 0..modes {
                let a = rng.gen_range(lo..hi) / (k + 1) as f64;
                for (x, e) in u.iter_mut().zip(&basis[k * g.n..(k + 1) * g.n]) {
                    *x += a * e;
                }
            }
            u
        }
        _ => (0..m.dim()).map(|_| rng.gen_range(lo..hi)).collect(),
    }
}

pub(super) fn check(m: &ModelSpec, n_samples: usize, seed: u64) -> HypothesisReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = m.constants();
    let d = m.dim();
    let mut fu = vec![0.0; d];
    let mut fv = vec![0.0; d];
    let mut fe = vec![0.0; d];
    let eq = m.equilibrium().to_vec();
    m.autonomous_drift_into(&eq, &mut fe);

    let mut rep = HypothesisReport {
        n_samples,
        dissipativity: f64::NEG_INFINITY,
        coercivity: f64::NEG_INFINITY,
        lipschitz: f64::NEG_INFINITY,
        bound: f64::NEG_INFINITY,
    };
    for _ in 0..n_samples.max(1) {
        let u = random_state(m, &mut rng);
        let v = random_state(m, &mut rng);
        m.autonomous_drift_into(&u, &mut fu);
        m.autonomous_drift_into(&v, &mut fv);
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let df: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| a - b).collect();
        let lhs = m.inner(&df, &diff);
        let margin =
            lhs + k.lambda * m.norm_v_sq(&diff) - k.c0 * m.norm_h_sq(&diff) * m.norm_v_sq(&u);
        rep.dissipativity = rep.dissipativity.max(margin);

        let du: Vec<f64> = u.iter().zip(&eq).map(|(a, b)| a - b).collect();
        let dfu: Vec<f64> = fu.iter().zip(&fe).map(|(a, b)| a - b).collect();
        let coerc = m.inner(&dfu, &du) + k.lambda * m.norm_v_sq(&du);
        rep.coercivity = rep.coercivity.max(coerc);

        let bu = m.diffusion_factor(&u);
        let bv = m.diffusion_factor(&v);
        rep.lipschitz = rep
            .lipschitz
            .max((bu - bv).abs() - k.beta0 * m.norm_h(&diff));
        rep.bound = rep.bound.max(bu.abs() - k.d0);
    }
    rep
}
