use criterion::{criterion_group, criterion_main, Criterion};
use sldp_core::pullback::{pullback_stationary, PullbackOptions};
use sldp_core::{
    action_gradient, em_step_sde, minimize_action, sample_noise, Init, MamOptions, ModelSpec, Path,
    TimeGrid,
};
use std::hint::black_box;

fn euler_maruyama(c: &mut Criterion) {
    let m = ModelSpec::burgers1d(64, 16, 1.0, false).unwrap();
    let g = TimeGrid::new(0.0, 1000.0 * m.default_dt(), 1000).unwrap();
    let noise = sample_noise(&g, m.modes(), 1).unwrap();
    let x0 = vec![0.0; 64];
    c.bench_function("em burgers64 1000 steps", |b| {
        b.iter(|| em_step_sde(&m, black_box(&x0), &g, &noise, 0.05).unwrap())
    });
}

fn noise_sampling(c: &mut Criterion) {
    let g = TimeGrid::new(0.0, 10.0, 10_000).unwrap();
    c.bench_function("noise 16 modes 10k steps", |b| {
        b.iter(|| sample_noise(&g, 16, black_box(7)).unwrap())
    });
}

fn gradient(c: &mut Criterion) {
    let m = ModelSpec::burgers1d(32, 32, 1.0, true).unwrap();
    let g = TimeGrid::new(-1.0, 0.0, 400).unwrap();
    let u = Path::from_fn(g, 32, |t| {
        (0..32).map(|i| (t + i as f64 * 0.1).sin()).collect()
    })
    .unwrap();
    c.bench_function("action gradient burgers32 400 steps", |b| {
        b.iter(|| action_gradient(&m, black_box(&u), (true, true)).unwrap())
    });
}

fn minimization(c: &mut Criterion) {
    let m = ModelSpec::hopf_radial(1.0).unwrap();
    c.bench_function("mam hopf T=10 400 steps", |b| {
        b.iter(|| {
            minimize_action(
                &m,
                black_box(&[2.0]),
                10.0,
                400,
                &Init::Linear,
                &MamOptions::default(),
            )
            .unwrap()
        })
    });
}

fn pullback(c: &mut Criterion) {
    let m = ModelSpec::linear2d_a2(0.3, 2.0).unwrap();
    let view = TimeGrid::with_dt(-1e-3, 0.0, 1e-3).unwrap();
    c.bench_function("pullback linear2d-a2 one sample", |b| {
        b.iter(|| {
            pullback_stationary(&m, 0.1, black_box(3), &view, &PullbackOptions::default()).unwrap()
        })
    });
}

criterion_group!(
    kernels,
    euler_maruyama,
    noise_sampling,
    gradient,
    minimization,
    pullback
);
criterion_main!(kernels);
