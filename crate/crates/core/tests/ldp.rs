use sldp_core::ldpverify::{
    estimate_event, ldp_slope, sample_stationary, write_estimates_csv, Event, MCEstimate,
    SampleOptions, SlopePoint,
};
use sldp_core::ModelSpec;
use statrs::function::erf::erfc;

fn at_dt(dt: f64) -> SampleOptions {
    SampleOptions {
        dt: Some(dt),
        ..Default::default()
    }
}

/// Stationary variance of the Euler–Maruyama chain for `dx = -a x dt + √ε dW`.
fn em_variance(a: f64, eps: f64, dt: f64) -> f64 {
    eps / (2.0 * a - a * a * dt)
}

#[test]
fn ou_tail_probability_lies_in_the_wilson_interval() {
    let m = ModelSpec::ou(1.0).unwrap();
    let (eps, dt, r) = (0.1, 0.01, 0.3);
    let est = estimate_event(
        &m,
        &[eps],
        &Event::NormAtLeast { r },
        100_000,
        17,
        &at_dt(dt),
    )
    .unwrap();
    let sd = em_variance(1.0, eps, dt).sqrt();
    // P(|X| ≥ r) = 2Φ̄(r/sd) = erfc(r/(sd√2))
    let exact = erfc(r / (sd * 2f64.sqrt()));
    let (lo, hi) = est[0].ci_95;
    assert!(lo <= exact && exact <= hi, "{exact} not in ({lo}, {hi})");
}

#[test]
fn isotropic_linear_tail_is_exponential() {
    // |X|² is exponential with mean 2σ², so P(|X| ≥ r) = exp(-r²/(2σ²))
    let m = ModelSpec::linear2d_a1(0.3).unwrap();
    let (eps, dt, r) = (0.2, 0.01, 1.0);
    let est = estimate_event(&m, &[eps], &Event::NormAtLeast { r }, 20_000, 8, &at_dt(dt)).unwrap();
    let exact = (-r * r / (2.0 * em_variance(0.3, eps, dt))).exp();
    let (lo, hi) = est[0].ci_95;
    assert!(lo <= exact && exact <= hi, "{exact} not in ({lo}, {hi})");
}

#[test]
fn the_same_seed_gives_the_same_samples() {
    let m = ModelSpec::linear2d_a2(0.3, 2.0).unwrap();
    let a = sample_stationary(&m, 0.1, 50, 99, &SampleOptions::default()).unwrap();
    let b = sample_stationary(&m, 0.1, 50, 99, &SampleOptions::default()).unwrap();
    let c = sample_stationary(&m, 0.1, 50, 100, &SampleOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn coverage(m: &ModelSpec, a: f64, r: f64, reps: u64, n: usize) -> usize {
    let (eps, dt) = (0.1, 0.01);
    // exact tail of |X| for a centred isotropic Gaussian in one or two dimensions
    let var = em_variance(a, eps, dt);
    let exact = if m.dim() == 1 {
        erfc(r / (var.sqrt() * 2f64.sqrt()))
    } else {
        (-r * r / (2.0 * var)).exp()
    };
    (0..reps)
        .filter(|&k| {
            let e = &estimate_event(
                m,
                &[eps],
                &Event::NormAtLeast { r },
                n,
                1000 + k,
                &at_dt(dt),
            )
            .unwrap()[0];
            e.ci_95.0 <= exact && exact <= e.ci_95.1
        })
        .count()
}

#[test]
fn wilson_intervals_cover_the_truth() {
    // 200 replications keep the chance of a spurious failure of the 90% bar near 1e-3
    let reps = 200;
    for (m, a, r) in [
        (ModelSpec::ou(1.0).unwrap(), 1.0, 0.3),
        (ModelSpec::linear2d_a1(0.3).unwrap(), 0.3, 0.8),
    ] {
        let covered = coverage(&m, a, r, reps, 400);
        assert!(
            covered * 10 >= reps as usize * 9,
            "{}: {covered}/{reps}",
            m.name()
        );
    }
}

#[test]
fn ou_exact_tails_extrapolate_to_the_quasipotential() {
    // event |x| ≥ 1 with variance ε/2: P = erfc(ε^{-1/2}), V(1) = 1
    let points: Vec<SlopePoint> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eps: &f64| SlopePoint {
            eps,
            log_scaled: eps * erfc(1.0 / eps.sqrt()).ln(),
            weight: 1.0,
        })
        .collect();
    let fit = ldp_slope(&points, 1.0).unwrap();
    assert!((fit.richardson + 1.0).abs() < 0.05, "{}", fit.richardson);
    assert!(fit.intercept < 0.0 && fit.residuals.len() == 4);
}

#[test]
fn isotropic_exact_tails_fit_without_error() {
    // P(|X| ≥ 1) = exp(-λ/ε), so ε log P = -λ at every ε
    let points: Vec<SlopePoint> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&eps| SlopePoint {
            eps,
            log_scaled: eps * (-0.3 / eps).exp().ln(),
            weight: 1.0,
        })
        .collect();
    let fit = ldp_slope(&points, 0.3).unwrap();
    assert!(fit.distance < 1e-10);
    assert!(fit.slope.abs() < 1e-10);
}

#[test]
fn estimates_export_to_csv() {
    let ev = Event::CoordinateAtLeast { index: 0, r: 0.5 };
    let rows = [
        MCEstimate::from_counts(0.2, ev.clone(), 100, 7),
        MCEstimate::from_counts(0.1, ev, 100, 0),
    ];
    let mut buf = Vec::new();
    write_estimates_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,n,hits,p_hat,lo95,hi95,log_scaled");
    assert!(lines[1].starts_with("0.2,100,7,0.07,"));
    assert!(lines[2].starts_with("0.1,100,0,0,0,") && lines[2].ends_with(','));
}

#[test]
fn too_few_points_are_refused() {
    let p = SlopePoint {
        eps: 0.1,
        log_scaled: -0.3,
        weight: 1.0,
    };
    assert!(ldp_slope(&[p, p], 0.3).is_err());
}
