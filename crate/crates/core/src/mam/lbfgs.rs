//! Preconditioned L-BFGS with Armijo backtracking.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub memory: usize,
    pub gtol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Converged,
    MaxIterations,
    /// No step along the quasi-Newton or the preconditioned gradient direction decreased the value.
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct Report {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_sup: f64,
    pub iterations: usize,
    pub outcome: Outcome,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize `eval`, which writes the gradient and returns the value, or `None` where the
/// objective is undefined (treated as +inf by the line search). `eval(x0)` must succeed.
/// `precond(g, out)` applies an approximate inverse Hessian.
pub(crate) fn minimize(
    x0: Vec<f64>,
    settings: Settings,
    mut eval: impl FnMut(&[f64], &mut [f64]) -> Option<f64>,
    precond: impl Fn(&[f64], &mut [f64]),
) -> Report {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g).expect("objective defined at the initial point");
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut d = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut alpha = vec![0.0; settings.memory];

    for it in 0..settings.max_iter {
        let gs = sup(&g);
        if gs < settings.gtol {
            return Report {
                x,
                value: f,
                grad_sup: gs,
                iterations: it,
                outcome: Outcome::Converged,
            };
        }
        let mut fresh = hist.is_empty();
        loop {
            // two-loop recursion
            d.copy_from_slice(&g);
            for (i, (s, y, rho)) in hist.iter().enumerate().rev() {
                alpha[i] = rho * dot(s, &d);
                for (dj, yj) in d.iter_mut().zip(y) {
                    *dj -= alpha[i] * yj;
                }
            }
            precond(&d, &mut r);
            if let Some((s, y, _)) = hist.back() {
                precond(y, &mut gt);
                let yhy = dot(y, &gt);
                if yhy > 0.0 {
                    let gamma = dot(s, y) / yhy;
                    r.iter_mut().for_each(|v| *v *= gamma);
                }
            }
            for (i, (s, y, rho)) in hist.iter().enumerate() {
                let beta = rho * dot(y, &r);
                for (rj, sj) in r.iter_mut().zip(s) {
                    *rj += sj * (alpha[i] - beta);
                }
            }
            for (dj, rj) in d.iter_mut().zip(&r) {
                *dj = -rj;
            }
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                if fresh {
                    return Report {
                        x,
                        value: f,
                        grad_sup: gs,
                        iterations: it,
                        outcome: Outcome::Stalled,
                    };
                }
                hist.clear();
                fresh = true;
                continue;
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..settings.max_backtracks {
                for j in 0..n {
                    xt[j] = x[j] + step * d[j];
                }
                if let Some(ft) = eval(&xt, &mut gt) {
                    if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                        accepted = Some(ft);
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some(ft) => {
                    let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                        if hist.len() == settings.memory {
                            hist.pop_front();
                        }
                        hist.push_back((s, y, 1.0 / sy));
                    }
                    std::mem::swap(&mut x, &mut xt);
                    std::mem::swap(&mut g, &mut gt);
                    f = ft;
                    break;
                }
                None if fresh => {
                    return Report {
                        x,
                        value: f,
                        grad_sup: gs,
                        iterations: it,
                        outcome: Outcome::Stalled,
                    };
                }
                None => {
                    hist.clear();
                    fresh = true;
                }
            }
        }
    }
    let gs = sup(&g);
    let outcome = if gs < settings.gtol {
        Outcome::Converged
    } else {
        Outcome::MaxIterations
    };
    Report {
        x,
        value: f,
        grad_sup: gs,
        iterations: settings.max_iter,
        outcome,
    }
}
