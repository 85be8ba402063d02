//! Deterministic particle approximation: every agent's opinion density is
//! represented by `N + 1` ordered particles splitting its mass into equal
//! fractions, and the particles move by a system of ODEs coupled to the
//! network nodes.

mod init;
mod integrate;

pub use init::{initial_state, quantile_partition};
pub use integrate::{simulate, simulate_with, IntegratorStats, Trajectory, MAX_HALVINGS};

use crate::error::{Error, Result};
use crate::kernels::{phi_eval, phi_lipschitz, phi_slope, zeta_sup, Configuration, Interaction, ModelKernels};
use crate::scenario::{PhiSpec, Scenario};
use crate::state::ParticleState;

/// `rho_k = sigma_N / (x_{k+1} - x_k)` for every interval.
pub fn discrete_densities(x: &[f64], sigma_n: f64) -> Result<Vec<f64>> {
    x.windows(2)
        .enumerate()
        .map(|(k, w)| {
            if w[1] > w[0] {
                Ok(sigma_n / (w[1] - w[0]))
            } else {
                Err(Error::NotIncreasing { agent: 0, index: k })
            }
        })
        .collect()
}

/// Plain average of all particles, boundary ones included.
pub fn discrete_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Brute-force mobility sum at particle `k` of agent `i`.
pub fn beta_k<K: Interaction + ?Sized>(state: &ParticleState, kernels: &K, diffusion: bool, i: usize, k: usize) -> f64 {
    if !diffusion {
        return 0.0;
    }
    let cfg = Configuration::from_state(state);
    let w = state.particles(i)[k];
    (0..state.n_agents())
        .map(|j| {
            let pair = cfg.pair(i, j);
            let s: f64 = state.particles(j).iter().map(|&v| kernels.mobility(w, v, &pair)).sum();
            state.sigma_n(j) * s
        })
        .sum()
}

/// Brute-force transport sum at particle `k` of agent `i`.
pub fn theta_k<K: Interaction + ?Sized>(state: &ParticleState, kernels: &K, i: usize, k: usize) -> f64 {
    let cfg = Configuration::from_state(state);
    let w = state.particles(i)[k];
    (0..state.n_agents())
        .map(|j| {
            let pair = cfg.pair(i, j);
            let s: f64 = state.particles(j).iter().map(|&v| kernels.transport(w, v, &pair)).sum();
            state.sigma_n(j) * s
        })
        .sum()
}

/// Time derivative of a [`ParticleState`], in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    n: usize,
    dim: usize,
    pub dx: Vec<f64>,
    pub da: Vec<f64>,
}

impl Derivative {
    pub fn particles(&self, i: usize) -> &[f64] {
        &self.dx[i * (self.n + 1)..(i + 1) * (self.n + 1)]
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.da[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest particle speed.
    pub fn max_speed(&self) -> f64 {
        self.dx.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Kernels plus the diffusion settings: everything the ODE right-hand side needs.
#[derive(Debug, Clone)]
pub struct Dynamics<K> {
    pub kernels: K,
    pub phi: PhiSpec,
    pub diffusion: bool,
    /// Steps producing a particle gap below this are rejected.
    pub min_gap: f64,
    /// See [`Scenario::transport_boundary_layer`].
    pub boundary_layer: Option<f64>,
}

impl Dynamics<ModelKernels> {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Dynamics {
            kernels: ModelKernels::from_scenario(scenario),
            phi: scenario.phi,
            diffusion: scenario.diffusion_enabled,
            min_gap: scenario.run.min_gap,
            boundary_layer: scenario.transport_boundary_layer,
        }
    }
}

impl<K: Interaction> Dynamics<K> {
    pub fn new(kernels: K, phi: PhiSpec, diffusion: bool, min_gap: f64) -> Self {
        Dynamics {
            kernels,
            phi,
            diffusion,
            min_gap,
            boundary_layer: None,
        }
    }

    pub fn with_boundary_layer(mut self, width: Option<f64>) -> Self {
        self.boundary_layer = width;
        self
    }

    fn damp_outward(&self, x: &[f64], theta: &mut [f64]) {
        if let Some(w) = self.boundary_layer {
            for (t, &xk) in theta.iter_mut().zip(x) {
                let room = if *t > 0.0 { 1.0 - xk } else { 1.0 + xk };
                if room < w {
                    let f = room / w;
                    *t *= f * f;
                }
            }
        }
    }

    /// Particle and node velocities; boundary particles stay fixed.
    pub fn rhs(&self, state: &ParticleState) -> Result<Derivative> {
        state.check_ordering()?;
        let (m, n, dim) = (state.n_agents(), state.n_intervals(), state.dim());
        let cfg = Configuration::from_state(state);
        let mut dx = vec![0.0; m * (n + 1)];
        let mut da = vec![0.0; m * dim];
        let mut theta = vec![0.0; n + 1];
        let mut beta = vec![0.0; n + 1];
        let mut flux = vec![0.0; n];
        for i in 0..m {
            let x = state.particles(i);
            let sn = state.sigma_n(i);
            self.kernels.transport_row(i, &cfg, &mut theta);
            self.damp_outward(x, &mut theta);
            let row = &mut dx[i * (n + 1)..(i + 1) * (n + 1)];
            if self.diffusion {
                self.kernels.mobility_row(i, &cfg, &mut beta);
                for (k, f) in flux.iter_mut().enumerate() {
                    *f = phi_eval(sn / (x[k + 1] - x[k]), &self.phi);
                }
                for k in 1..n {
                    row[k] = beta[k] / sn * (flux[k - 1] - flux[k]) + theta[k];
                }
            } else {
                row[1..n].copy_from_slice(&theta[1..n]);
            }
            self.kernels.node_velocity_row(i, &cfg, &mut da[i * dim..(i + 1) * dim]);
        }
        Ok(Derivative { n, dim, dx, da })
    }

    /// Upper bound on the spectral radius of the Jacobian (Gershgorin on the
    /// diffusion part, Lipschitz constants for the rest).
    pub fn stiffness(&self, state: &ParticleState) -> f64 {
        let (m, n) = (state.n_agents(), state.n_intervals());
        let consts = self.kernels.constants();
        let total_mass: f64 = state.masses().iter().sum();
        let c_k = consts.c_k.unwrap_or(1.0);
        let mut lambda = 2.0 * c_k * total_mass * (n + 1) as f64 / n as f64;
        lambda += m as f64 * consts.v_lip.unwrap_or(2.0);
        if let Some(w) = self.boundary_layer {
            // the damping factor has slope at most 2 / w
            let theta_max = c_k * total_mass * (n + 1) as f64 / n as f64 * crate::scenario::OMEGA_LEN;
            lambda += 2.0 * theta_max / w;
        }
        if self.diffusion {
            let cfg = Configuration::from_state(state);
            let mut beta = vec![0.0; n + 1];
            let mut stiff = vec![0.0; n];
            for i in 0..m {
                let x = state.particles(i);
                let sn = state.sigma_n(i);
                self.kernels.mobility_row(i, &cfg, &mut beta);
                for (k, s) in stiff.iter_mut().enumerate() {
                    let g = x[k + 1] - x[k];
                    let rho = sn / g;
                    *s = phi_slope(rho, &self.phi) * rho / g;
                }
                for k in 1..n {
                    let l = 2.0 * beta[k].abs() / sn * (stiff[k - 1] + stiff[k]);
                    lambda = lambda.max(l);
                }
            }
        }
        lambda
    }

    /// A priori bound on particle speeds at `state`: the mobility and density
    /// ranges times the Lipschitz constant of the diffusion map, plus the
    /// largest transport sum.
    pub fn velocity_bound(&self, state: &ParticleState) -> f64 {
        let n = state.n_intervals();
        let cfg = Configuration::from_state(state);
        let mut row = vec![0.0; n + 1];
        let mut bound: f64 = 0.0;
        for i in 0..state.n_agents() {
            let sn = state.sigma_n(i);
            self.kernels.transport_row(i, &cfg, &mut row);
            let theta = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut diff = 0.0;
            if self.diffusion {
                self.kernels.mobility_row(i, &cfg, &mut row);
                let beta = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let rho = state.particles(i).windows(2).map(|w| sn / (w[1] - w[0]));
                let rho_max = rho.fold(0.0f64, f64::max);
                diff = beta * phi_lipschitz(&self.phi) * rho_max / sn;
            }
            bound = bound.max(diff + theta);
        }
        bound
    }
}

/// Growth rate `c_K sigma^M` of the gap and density bounds for the model kernels.
pub fn gap_rate(kernels: &ModelKernels, total_mass: f64) -> f64 {
    zeta_sup(&kernels.attitude) * total_mass
}
