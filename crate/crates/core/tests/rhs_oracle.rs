//! Right-hand side on small hand instances against a term-by-term evaluation
//! written out independently of the crate's kernel rows.

use dpa_core::dpa::discrete_mean;
use dpa_core::{AttitudeParams, Dynamics, InteractionRadius, ModelKernels, ParticleState, PhiSpec};

fn zeta(d: f64, p: &AttitudeParams) -> f64 {
    let d = d.abs();
    if d <= p.r_f {
        1.0 - 0.1 * d / p.r_f
    } else if d <= p.r_a {
        0.9 - 0.8 * (d - p.r_f) / (p.r_a - p.r_f)
    } else if d <= p.r_r {
        0.1 - 0.2 * (d - p.r_a) / (p.r_r - p.r_a)
    } else if d <= p.r_l {
        -0.1 - 0.8 * (d - p.r_r) / (p.r_l - p.r_r)
    } else {
        -0.9 - 0.1 * (d - p.r_l)
    }
}

struct Instance {
    x: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    sigma: Vec<f64>,
}

/// Velocities from the ODE system written out sum by sum.
fn oracle(inst: &Instance, p: &AttitudeParams, radius: f64, phi: impl Fn(f64) -> f64, diffusion: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = inst.x.len();
    let n = inst.x[0].len() - 1;
    let mu: Vec<f64> = inst.x.iter().map(|r| r.iter().sum::<f64>() / (n + 1) as f64).collect();
    let connected = |i: usize, j: usize| {
        let d2: f64 = inst.a[i].iter().zip(&inst.a[j]).map(|(u, v)| (u - v) * (u - v)).sum();
        if d2.sqrt() <= radius {
            1.0
        } else {
            0.0
        }
    };
    let mut dx = vec![vec![0.0; n + 1]; m];
    let mut da = vec![vec![0.0; inst.a[0].len()]; m];
    for i in 0..m {
        let sn = inst.sigma[i] / n as f64;
        for k in 1..n {
            let w = inst.x[i][k];
            let mut beta = 0.0;
            let mut theta = 0.0;
            for j in 0..m {
                let snj = inst.sigma[j] / n as f64;
                for l in 0..=n {
                    let v = inst.x[j][l];
                    beta += snj * (mu[j] - w) * (mu[j] - w);
                    theta += snj * connected(i, j) * zeta(mu[i] - mu[j], p) * (v - w);
                }
            }
            let rho_left = sn / (inst.x[i][k] - inst.x[i][k - 1]);
            let rho_right = sn / (inst.x[i][k + 1] - inst.x[i][k]);
            let diff = if diffusion {
                beta / sn * (phi(rho_left) - phi(rho_right))
            } else {
                0.0
            };
            dx[i][k] = diff + theta;
        }
        for j in 0..m {
            let c = connected(i, j) * zeta(mu[i] - mu[j], p);
            for (l, out) in da[i].iter_mut().enumerate() {
                *out += c * (inst.a[j][l] - inst.a[i][l]);
            }
        }
    }
    (dx, da)
}

fn instance(second: [f64; 5]) -> Instance {
    Instance {
        x: vec![vec![-1.0, -0.5, -0.1, 0.3, 1.0], second.to_vec()],
        a: vec![vec![0.0, 0.0], vec![1.2, 0.5]],
        sigma: vec![1.0, 0.7],
    }
}

fn check(inst: &Instance, radius: f64, phi: PhiSpec, diffusion: bool) {
    let p = AttitudeParams::BLACK;
    let state = ParticleState::new(0.0, inst.x.clone(), inst.a.clone(), inst.sigma.clone());
    let dynamics = Dynamics::new(ModelKernels::new(p, InteractionRadius::Finite(radius)), phi, diffusion, 1e-13);
    let got = dynamics.rhs(&state).unwrap();
    let phi_fn = move |r: f64| match phi {
        PhiSpec::Linear => r,
        PhiSpec::Power { exponent, rho_max } => r.min(rho_max).powf(exponent),
    };
    let (dx, da) = oracle(inst, &p, radius, phi_fn, diffusion);
    for i in 0..2 {
        assert_eq!(got.particles(i)[0], 0.0);
        assert_eq!(got.particles(i)[4], 0.0);
        for k in 0..5 {
            let (g, e) = (got.particles(i)[k], dx[i][k]);
            assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "dx[{i}][{k}]: {g} vs {e}");
        }
        for l in 0..2 {
            let (g, e) = (got.node(i)[l], da[i][l]);
            assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "da[{i}][{l}]: {g} vs {e}");
        }
    }
}

#[test]
fn two_agents_homophilia_connected() {
    let inst = instance([-1.0, -0.2, 0.25, 0.6, 1.0]);
    assert!((discrete_mean(&inst.x[0]) - discrete_mean(&inst.x[1])).abs() < AttitudeParams::BLACK.r_f);
    check(&inst, 2.0, PhiSpec::Linear, true);
}

#[test]
fn two_agents_mistrust_connected() {
    let inst = instance([-1.0, 0.3, 0.5, 0.8, 1.0]);
    let d = (discrete_mean(&inst.x[0]) - discrete_mean(&inst.x[1])).abs();
    assert!(d > AttitudeParams::BLACK.r_r && d < AttitudeParams::BLACK.r_l);
    check(&inst, 2.0, PhiSpec::Linear, true);
}

#[test]
fn two_agents_disconnected() {
    check(&instance([-1.0, 0.3, 0.5, 0.8, 1.0]), 1.0, PhiSpec::Linear, true);
}

#[test]
fn two_agents_power_diffusion() {
    let phi = PhiSpec::Power {
        exponent: 2.0,
        rho_max: 10.0,
    };
    check(&instance([-1.0, -0.2, 0.25, 0.6, 1.0]), 2.0, phi, true);
}

#[test]
fn two_agents_without_diffusion() {
    check(&instance([-1.0, -0.2, 0.25, 0.6, 1.0]), 2.0, PhiSpec::Linear, false);
}

#[test]
fn unordered_particles_are_rejected() {
    let mut inst = instance([-1.0, -0.2, 0.25, 0.6, 1.0]);
    inst.x[1].swap(1, 2);
    let state = ParticleState::new(0.0, inst.x, inst.a, inst.sigma);
    let dynamics = Dynamics::new(
        ModelKernels::new(AttitudeParams::BLACK, InteractionRadius::Infinite),
        PhiSpec::Linear,
        true,
        1e-13,
    );
    assert!(dynamics.rhs(&state).is_err());
}
