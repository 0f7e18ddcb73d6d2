use nalgebra::{Matrix2, Vector2};
use sldp_core::integrate::{em_step_sde, integrate_skeleton, priori_bound};
use sldp_core::{sample_noise, Control, ModelSpec, NoiseKey, TimeGrid};

#[test]
fn ou_without_noise_follows_the_exponential() {
    let m = ModelSpec::ou(1.0).unwrap();
    let g = TimeGrid::with_dt(0.0, 1.0, 1e-3).unwrap();
    let n = sample_noise(&g, 1, 0).unwrap();
    let p = em_step_sde(&m, &[1.0], &g, &n, 0.0).unwrap();
    assert!((p.last()[0] - (-1.0f64).exp()).abs() < 2e-3);
}

#[test]
fn rotating_linear_flow_matches_matrix_exponential() {
    let m = ModelSpec::linear2d_a2(0.3, 2.0).unwrap();
    // EM global error is about dt/2·|A²| ≈ 2e-4 here
    let g = TimeGrid::with_dt(0.0, 1.0, 1e-4).unwrap();
    let n = sample_noise(&g, 2, 0).unwrap();
    let p = em_step_sde(&m, &[1.0, 0.0], &g, &n, 0.0).unwrap();
    let a = Matrix2::new(-0.3, -2.0, 2.0, -0.3);
    let exact = a.exp() * Vector2::new(1.0, 0.0);
    let got = p.last();
    assert!(
        (got[0] - exact[0]).abs() < 1e-3 && (got[1] - exact[1]).abs() < 1e-3,
        "{got:?} vs {exact}"
    );
}

#[test]
fn ou_variance_at_time_ten() {
    let m = ModelSpec::ou(1.0).unwrap();
    let g = TimeGrid::with_dt(0.0, 10.0, 1e-3).unwrap();
    let n = 10_000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for seed in 0..n {
        let noise = NoiseKey::new(seed, 1).sample(&g).unwrap();
        let x = em_step_sde(&m, &[0.0], &g, &noise, 0.1).unwrap().last()[0];
        sum += x;
        sq += x * x;
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    assert!((0.045..=0.055).contains(&var), "variance {var}");
}

#[test]
fn optimal_escape_control_reaches_the_target() {
    let m = ModelSpec::ou(1.0).unwrap();
    let x = 0.7;
    let t = 6.0;
    let g = TimeGrid::with_dt(-t, 0.0, 1e-3).unwrap();
    let v = Control::from_fn(g, 1, |s| vec![2.0 * x * s.exp()]).unwrap();
    let p = integrate_skeleton(&m, &[x * (-t).exp()], &g, &v).unwrap();
    assert!((p.last()[0] - x).abs() < 1e-3);
}

#[test]
fn linear_semigroup_does_not_grow() {
    for m in [
        ModelSpec::ou(2.0).unwrap(),
        ModelSpec::linear2d_a2(0.3, 2.0).unwrap(),
    ] {
        let g = TimeGrid::with_dt(0.0, 5.0, 1e-2).unwrap();
        let x0 = vec![1.0; m.dim()];
        let p = integrate_skeleton(&m, &x0, &g, &Control::zero(g, m.modes())).unwrap();
        for i in 1..p.len() {
            assert!(m.norm_h(p.state(i)) <= m.norm_h(p.state(i - 1)));
        }
    }
}

#[test]
fn skeleton_solutions_with_one_control_contract() {
    // Same control, two initial states: the gap decays at least like e^{-λ₀ t} for some λ₀ > 0.
    let m = ModelSpec::burgers1d(32, 8, 1.0, false).unwrap();
    let rate = m.relaxation_rate();
    let dt = m.default_dt();
    let steps = (10.0 / rate / dt).round() as usize;
    let g = TimeGrid::new(0.0, steps as f64 * dt, steps).unwrap();
    let v = Control::from_fn(g, m.modes(), |t| {
        (0..m.modes()).map(|k| (t * (k + 1) as f64).sin()).collect()
    })
    .unwrap();
    let a: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.3).sin()).collect();
    let b: Vec<f64> = (0..32).map(|i| -((i as f64) * 0.2).cos()).collect();
    let pa = integrate_skeleton(&m, &a, &g, &v).unwrap();
    let pb = integrate_skeleton(&m, &b, &g, &v).unwrap();
    let gap = |i: usize| {
        let d: Vec<f64> = pa
            .state(i)
            .iter()
            .zip(pb.state(i))
            .map(|(x, y)| x - y)
            .collect();
        m.norm_h(&d)
    };
    let (g0, g1) = (gap(0), gap(steps));
    let observed = -(g1 / g0).ln() / g.t_end();
    assert!(observed > 0.0, "gap {g0} -> {g1}");
    // Bound with λ₀ = observed and the a-priori term.
    let mm = v.sq_norm();
    let d = m.big_d();
    let bound = (-observed * g.t_end()).exp() * (g0 * g0 + 2.0 * d * d * mm / rate).sqrt();
    assert!(g1 <= bound);
}

#[test]
fn priori_bound_holds_for_smooth_controls() {
    for m in ModelSpec::shipped() {
        let g = TimeGrid::with_dt(0.0, 2.0, m.default_dt()).unwrap();
        let x0: Vec<f64> = (0..m.dim()).map(|i| 0.5 * ((i + 1) as f64).sin()).collect();
        let v = Control::from_fn(g, m.modes(), |t| {
            (0..m.modes()).map(|k| 3.0 * (t + k as f64).cos()).collect()
        })
        .unwrap();
        let Some(bound) = priori_bound(&m, &x0, v.sq_norm()) else {
            assert!(matches!(m.name(), "hopf-radial" | "periodic1d"));
            continue;
        };
        let p = integrate_skeleton(&m, &x0, &g, &v).unwrap();
        let sup = (0..p.len())
            .map(|i| m.norm_h_sq(p.state(i)))
            .fold(0.0, f64::max);
        assert!(sup <= bound, "{}: {sup} > {bound}", m.name());
    }
}

#[test]
fn burgers_energy_decays_without_control() {
    let m = ModelSpec::burgers1d(64, 16, 1.0, true).unwrap();
    let g = TimeGrid::with_dt(0.0, 500.0 * m.default_dt(), m.default_dt()).unwrap();
    let u0: Vec<f64> = (0..64)
        .map(|i| 3.0 * ((i as f64) * 0.7).sin() + 1.0)
        .collect();
    let p = integrate_skeleton(&m, &u0, &g, &Control::zero(g, m.modes())).unwrap();
    for i in 1..p.len() {
        assert!(m.norm_h_sq(p.state(i)) < m.norm_h_sq(p.state(i - 1)));
    }
}

#[test]
fn csv_export_has_time_then_state_columns() {
    let m = ModelSpec::linear2d_a1(0.3).unwrap();
    let g = TimeGrid::with_dt(0.0, 0.1, 0.05).unwrap();
    let p = integrate_skeleton(&m, &[1.0, 2.0], &g, &Control::zero(g, 2)).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x0,x1");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,1,2"));
}
