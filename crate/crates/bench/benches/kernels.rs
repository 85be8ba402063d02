use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpa_core::dpa::{initial_state, quantile_partition};
use dpa_core::transport::{reconstruct, wasserstein1};
use dpa_core::{AttitudeParams, DensitySpec, Dynamics, InteractionRadius, Scenario};

fn scenario(agents: usize, n: usize) -> Scenario {
    let mut s = Scenario::sampled(AttitudeParams::BLACK, InteractionRadius::Finite(5.0), 1);
    s.sampling.as_mut().unwrap().n_agents = agents;
    s.run.n_particles = n;
    s
}

fn rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for (m, n) in [(10, 50), (40, 100), (40, 200)] {
        let s = scenario(m, n);
        let d = Dynamics::from_scenario(&s);
        let x = initial_state(&s).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("M{m}_N{n}")), &x, |b, x| {
            b.iter(|| d.rhs(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn wasserstein(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein1");
    for n in [100, 1000] {
        let a: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x * x * x).collect();
        let (da, db) = (reconstruct(&a, 1.0 / n as f64).unwrap(), reconstruct(&b, 1.0 / n as f64).unwrap());
        group.bench_with_input(BenchmarkId::from_parameter(n), &(da, db), |bch, (da, db)| {
            bch.iter(|| wasserstein1(black_box(da), black_box(db)).unwrap())
        });
    }
    group.finish();
}

fn quantiles(c: &mut Criterion) {
    let density = DensitySpec::TruncatedGaussian {
        mean: 0.2,
        variance: 0.1,
    };
    let mut group = c.benchmark_group("quantile_partition");
    for n in [100, 400] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| quantile_partition(black_box(&density), 1.0, n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rhs, wasserstein, quantiles);
criterion_main!(benches);
