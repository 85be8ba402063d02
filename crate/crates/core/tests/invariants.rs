//! Invariants of the particle scheme along short runs.

use dpa_core::dpa::{discrete_densities, discrete_mean, initial_state};
use dpa_core::transport::{first_moment, reconstruct};
use dpa_core::{simulate, AttitudeParams, Dynamics, Interaction, InteractionRadius, ParticleState, Scenario};
use proptest::prelude::*;

fn small(attitude: AttitudeParams, radius: f64, seed: u64, agents: usize, n: usize) -> Scenario {
    let mut s = Scenario::sampled(attitude, InteractionRadius::Finite(radius), seed);
    s.sampling.as_mut().unwrap().n_agents = agents;
    s.run.n_particles = n;
    s.run.t_final = 0.1;
    s.run.snapshot_every = 0.02;
    s
}

fn c_k(s: &Scenario) -> f64 {
    Dynamics::from_scenario(s).kernels.constants().c_k.expect("model kernels declare c_K")
}

fn mass_error(s: &ParticleState) -> f64 {
    (0..s.n_agents())
        .map(|i| {
            let x = s.particles(i);
            let rho = discrete_densities(x, s.sigma_n(i)).unwrap();
            let m: f64 = rho.iter().zip(x.windows(2)).map(|(r, w)| r * (w[1] - w[0])).sum();
            (m - s.mass(i)).abs() / s.mass(i)
        })
        .fold(0.0, f64::max)
}

#[test]
fn zero_final_time_gives_the_initial_state() {
    let mut s = small(AttitudeParams::BLACK, 5.0, 2, 5, 20);
    s.run.t_final = 0.0;
    let traj = simulate(&s).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.snapshots[0], initial_state(&s).unwrap());
}

#[test]
fn snapshots_start_at_the_quantiles_and_keep_their_shape() {
    let s = small(AttitudeParams::BLACK, 5.0, 4, 6, 24);
    let traj = simulate(&s).unwrap();
    assert_eq!(traj.snapshots[0], initial_state(&s).unwrap());
    assert_eq!(traj.snapshots.len(), 6);
    assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    assert!((traj.last().t - 0.1).abs() < 1e-12);
    assert_eq!(traj.max_speed.len(), traj.snapshots.len() - 1);
    for snap in &traj.snapshots {
        for i in 0..snap.n_agents() {
            let x = snap.particles(i);
            assert_eq!((x[0], x[x.len() - 1]), (-1.0, 1.0));
        }
    }
}

#[test]
fn euler_step_follows_the_rhs() {
    let s = small(AttitudeParams::RED, 5.0, 1, 3, 12);
    let d = Dynamics::from_scenario(&s);
    let x0 = initial_state(&s).unwrap();
    let v = d.rhs(&x0).unwrap();
    for dt in [1e-6, 1e-8] {
        let x1 = d.step_euler(&x0, dt).unwrap();
        for (k, (a, b)) in x1.flat_particles().iter().zip(x0.flat_particles()).enumerate() {
            assert!(((a - b) / dt - v.dx[k]).abs() <= 1e-6 * v.dx[k].abs().max(1.0));
        }
    }
}

#[test]
fn no_diffusion_with_boundary_layer_stays_ordered() {
    let mut s = small(AttitudeParams::BLUE, 10.0, 3, 8, 40);
    s.diffusion_enabled = false;
    s.transport_boundary_layer = Some(0.05);
    s.run.t_final = 0.3;
    let traj = simulate(&s).unwrap();
    for snap in &traj.snapshots {
        snap.check_ordering().unwrap();
        assert!(mass_error(snap) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn run_invariants(seed in 0u64..1000, agents in 2usize..5, n in 8usize..20, radius in 1.0f64..12.0, preset in 0usize..4) {
        let attitude = [AttitudeParams::BLUE, AttitudeParams::BLACK, AttitudeParams::RED, AttitudeParams::OLIVE][preset];
        let s = small(attitude, radius, seed, agents, n);
        let traj = simulate(&s).unwrap();
        let mu = c_k(&s) * traj.scenario.total_mass();
        let first = traj.initial();
        let (g0, big0) = (first.min_gap(), first.max_gap());
        for snap in &traj.snapshots {
            snap.check_ordering().unwrap();
            prop_assert!(mass_error(snap) < 1e-10);
            prop_assert!(snap.min_gap() >= g0 * (-mu * snap.t).exp() * 0.99);
            prop_assert!(snap.max_gap() <= big0 * (mu * snap.t).exp() * 1.01);
            for i in 0..snap.n_agents() {
                let x = snap.particles(i);
                let d = reconstruct(x, snap.sigma_n(i)).unwrap();
                let nn = (x.len() - 1) as f64;
                let expected = nn / (nn + 1.0) * first_moment(&d);
                prop_assert!((discrete_mean(x) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rk4_step_keeps_mass_and_order(seed in 0u64..1000, dt in 1e-5f64..1e-3) {
        let s = small(AttitudeParams::BLACK, 5.0, seed, 3, 16);
        let d = Dynamics::from_scenario(&s);
        let x1 = d.step_rk4(&initial_state(&s).unwrap(), dt).unwrap();
        x1.check_ordering().unwrap();
        prop_assert!(mass_error(&x1) < 1e-12);
    }
}
