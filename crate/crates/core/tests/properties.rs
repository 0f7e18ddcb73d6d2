use proptest::prelude::*;
use sldp_core::integrate::{
    em_step_sde_with, integrate_skeleton_with, priori_bound, DEFAULT_BLOWUP,
};
use sldp_core::{
    action, action_gradient, integrate_skeleton, Control, ModelSpec, NoiseKey, Path,
    SkeletonScheme, TimeGrid,
};

fn linear_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::ou(1.0).unwrap(),
        ModelSpec::linear2d_a1(0.3).unwrap(),
        ModelSpec::linear2d_a2(0.3, 2.0).unwrap(),
    ]
}

fn path_from(m: &ModelSpec, g: TimeGrid, coeffs: &[f64]) -> Path {
    // a few Fourier terms per coordinate
    Path::from_fn(g, m.dim(), |t| {
        (0..m.dim())
            .map(|j| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * t + j as f64).sin())
                    .sum::<f64>()
                    + 1.0
            })
            .collect()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_is_non_negative(which in 0usize..4, coeffs in prop::collection::vec(-2.0f64..2.0, 3)) {
        let m = match which {
            3 => ModelSpec::hopf_radial(1.0).unwrap(),
            k => linear_models().swap_remove(k),
        };
        let g = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let mut coeffs = coeffs;
        if which == 3 {
            // keep r away from 0 where the radial diffusion vanishes
            coeffs.iter_mut().for_each(|c| *c *= 0.1);
        }
        let r = action(&m, &path_from(&m, g, &coeffs)).unwrap();
        prop_assert!(r.value >= 0.0);
    }

    #[test]
    fn linear_action_is_quadratic(which in 0usize..3, c in 0.1f64..5.0, coeffs in prop::collection::vec(-2.0f64..2.0, 3)) {
        let m = linear_models().swap_remove(which);
        let g = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let u = path_from(&m, g, &coeffs);
        let cu = Path::new(g, m.dim(), u.values().iter().map(|x| c * x).collect()).unwrap();
        let (s, sc) = (action(&m, &u).unwrap().value, action(&m, &cu).unwrap().value);
        prop_assert!((sc - c * c * s).abs() <= 1e-9 * (1.0 + sc));
    }

    #[test]
    fn gradient_agrees_with_central_differences(which in 0usize..4, coeffs in prop::collection::vec(-1.0f64..1.0, 3), node in 1usize..19) {
        let m = match which {
            3 => ModelSpec::burgers1d(6, 6, 1.0, true).unwrap(),
            k => linear_models().swap_remove(k),
        };
        let g = TimeGrid::new(0.0, 0.2, 20).unwrap();
        let u = path_from(&m, g, &coeffs);
        let grad = action_gradient(&m, &u, (false, false)).unwrap();
        let h = 1e-6;
        for j in 0..m.dim() {
            let idx = node * m.dim() + j;
            let shifted = |d: f64| {
                let mut v = u.values().to_vec();
                v[idx] += d;
                action(&m, &Path::new(g, m.dim(), v).unwrap()).unwrap().value
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            prop_assert!((fd - grad[idx]).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", fd, grad[idx]);
        }
    }

    #[test]
    fn a_priori_bound_holds_for_random_controls(which in 0usize..4, amp in prop::collection::vec(-3.0f64..3.0, 4), freq in 0.5f64..6.0) {
        let m = match which {
            3 => ModelSpec::burgers1d(16, 4, 1.0, true).unwrap(),
            k => linear_models().swap_remove(k),
        };
        let g = TimeGrid::new(0.0, 1.0, 4000).unwrap();
        let v = Control::from_fn(g, m.modes(), |t| (0..m.modes()).map(|k| amp[k % 4] * (freq * t + k as f64).cos()).collect()).unwrap();
        let x0: Vec<f64> = (0..m.dim()).map(|i| amp[i % 4] * 0.2).collect();
        let bound = priori_bound(&m, &x0, v.sq_norm()).unwrap();
        let p = integrate_skeleton(&m, &x0, &g, &v).unwrap();
        let sup = (0..p.len()).map(|i| m.norm_h_sq(p.state(i))).fold(0.0, f64::max);
        prop_assert!(sup <= bound, "{} > {}", sup, bound);
    }

    #[test]
    fn convection_is_energy_neutral(u in prop::collection::vec(-5.0f64..5.0, 12)) {
        let m = ModelSpec::burgers1d(12, 12, 1.0, true).unwrap();
        let f = m.nonlinear(&u).unwrap();
        let scale: f64 = f.iter().map(|x| x.abs()).sum::<f64>() * 5.0 + 1.0;
        prop_assert!(m.inner(&f, &u).abs() <= 1e-12 * scale);
    }

    #[test]
    fn noise_windows_agree_on_their_overlap(seed in any::<u64>(), a in -400i64..0, len in 1i64..200, off in 0i64..200, sub in 1i64..200) {
        let dt = 0.01;
        let key = NoiseKey::new(seed, 2);
        let outer = TimeGrid::new(a as f64 * dt, (a + len + off + sub) as f64 * dt, (len + off + sub) as usize).unwrap();
        let inner = TimeGrid::new((a + off) as f64 * dt, (a + off + sub) as f64 * dt, sub as usize).unwrap();
        let wo = key.sample(&outer).unwrap();
        let wi = key.sample(&inner).unwrap();
        // both windows draw the same normals; √dt may differ in the last bit
        for i in 0..sub as usize {
            for (x, y) in wi.step(i).iter().zip(wo.step(i + off as usize)) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs());
            }
        }
    }

    #[test]
    fn euler_skeleton_is_noiseless_euler_maruyama(which in 0usize..3, x0 in prop::collection::vec(-2.0f64..2.0, 2), seed in any::<u64>()) {
        let m = vec![ModelSpec::ou(1.0).unwrap(), ModelSpec::periodic1d(), ModelSpec::linear2d_a2(0.3, 2.0).unwrap()].swap_remove(which);
        let x0 = &x0[..m.dim()];
        let g = TimeGrid::new(-1.0, 1.0, 200).unwrap();
        let w = NoiseKey::new(seed, m.modes()).sample(&g).unwrap();
        let a = em_step_sde_with(&m, x0, &g, &w, 0.0, DEFAULT_BLOWUP).unwrap();
        let b = integrate_skeleton_with(&m, x0, &g, &Control::zero(g, m.modes()), SkeletonScheme::Euler, DEFAULT_BLOWUP).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}
