//! Interaction functions of the opinion/network model and the generic kernel
//! interface the particle scheme is written against.
//!
//! The scheme only needs, per agent `i`, the transport and mobility sums over
//! every particle of every agent, and the node velocity summed over agents.
//! [`Interaction`] exposes the pointwise kernels and provides those row sums
//! by brute force; [`ModelKernels`] overrides the row sums with closed forms
//! that exploit the structure of the model kernels.

use crate::scenario::{AttitudeParams, InteractionRadius, NodeVelocitySign, PhiSpec, Scenario, OMEGA_LEN};

/// The five attitude areas, by distance between mean opinions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttitudeArea {
    Homophilia,
    Curiosity,
    Indifference,
    Mistrust,
    Heterophobia,
}

impl AttitudeArea {
    pub const ALL: [AttitudeArea; 5] = [
        AttitudeArea::Homophilia,
        AttitudeArea::Curiosity,
        AttitudeArea::Indifference,
        AttitudeArea::Mistrust,
        AttitudeArea::Heterophobia,
    ];

    /// Area containing the distance `|s|`; each area is closed on the left.
    pub fn of(s: f64, p: &AttitudeParams) -> Self {
        let d = s.abs();
        if d < p.r_f {
            AttitudeArea::Homophilia
        } else if d < p.r_a {
            AttitudeArea::Curiosity
        } else if d < p.r_r {
            AttitudeArea::Indifference
        } else if d < p.r_l {
            AttitudeArea::Mistrust
        } else {
            AttitudeArea::Heterophobia
        }
    }
}

/// Linear piece of the attitude function belonging to `area`, evaluated at
/// `|s|` whether or not `|s|` lies in that area.
pub fn zeta_piece(area: AttitudeArea, s: f64, p: &AttitudeParams) -> f64 {
    let d = s.abs();
    match area {
        AttitudeArea::Homophilia => 1.0 - 0.1 * d / p.r_f,
        AttitudeArea::Curiosity => 0.1 + 0.8 * (1.0 - (d - p.r_f) / (p.r_a - p.r_f)),
        AttitudeArea::Indifference => -0.1 + 0.2 * (1.0 - (d - p.r_a) / (p.r_r - p.r_a)),
        AttitudeArea::Mistrust => -0.9 + 0.8 * (1.0 - (d - p.r_r) / (p.r_l - p.r_r)),
        AttitudeArea::Heterophobia => -0.9 - 0.1 * (d - p.r_l),
    }
}

/// Attitude function: attraction for positive values, repulsion for negative.
pub fn attitude_zeta(s: f64, p: &AttitudeParams) -> f64 {
    zeta_piece(AttitudeArea::of(s, p), s, p)
}

/// `sup |zeta|` over the reachable distances `[0, 2]`.
pub fn zeta_sup(p: &AttitudeParams) -> f64 {
    attitude_zeta(OMEGA_LEN, p).abs().max(1.0)
}

/// Network cutoff: 1 when nodes are within the interaction radius.
pub fn omega(distance: f64, radius: InteractionRadius) -> f64 {
    if radius.contains(distance) {
        1.0
    } else {
        0.0
    }
}

/// Transport kernel `omega(a_ij) zeta(mu_i - mu_j) (v - w)`.
pub fn kernel_k_model(
    w: f64,
    v: f64,
    mean_i: f64,
    mean_j: f64,
    distance: f64,
    p: &AttitudeParams,
    radius: InteractionRadius,
) -> f64 {
    omega(distance, radius) * attitude_zeta(mean_i - mean_j, p) * (v - w)
}

/// Diffusion mobility `(mu_j - w)^2`.
pub fn mobility_a_model(w: f64, mean_j: f64) -> f64 {
    (mean_j - w) * (mean_j - w)
}

/// Velocity of node `i` induced by node `j`.
pub fn network_velocity_model(
    mean_i: f64,
    mean_j: f64,
    node_i: &[f64],
    node_j: &[f64],
    p: &AttitudeParams,
    radius: InteractionRadius,
    sign: NodeVelocitySign,
) -> Vec<f64> {
    let distance = euclidean(node_i, node_j);
    let c = attitude_zeta((mean_i - mean_j).abs(), p) * omega(distance, radius) * orientation(sign);
    node_i.iter().zip(node_j).map(|(ai, aj)| c * (aj - ai)).collect()
}

fn orientation(sign: NodeVelocitySign) -> f64 {
    match sign {
        NodeVelocitySign::Attract => 1.0,
        NodeVelocitySign::Repel => -1.0,
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nonlinear diffusion map.
pub fn phi_eval(rho: f64, spec: &PhiSpec) -> f64 {
    match *spec {
        PhiSpec::Linear => rho,
        PhiSpec::Power { exponent, rho_max } => rho.min(rho_max).powf(exponent),
    }
}

/// Slope of the diffusion map at `rho` (right derivative at the clamp).
pub fn phi_slope(rho: f64, spec: &PhiSpec) -> f64 {
    match *spec {
        PhiSpec::Linear => 1.0,
        PhiSpec::Power { exponent, rho_max } => {
            if rho < rho_max {
                exponent * rho.powf(exponent - 1.0)
            } else {
                0.0
            }
        }
    }
}

/// Global Lipschitz constant of the diffusion map.
pub fn phi_lipschitz(spec: &PhiSpec) -> f64 {
    match *spec {
        PhiSpec::Linear => 1.0,
        PhiSpec::Power { exponent, rho_max } => exponent * rho_max.powf(exponent - 1.0),
    }
}

/// Declared regularity constants, used for invariant checks and step-size
/// estimates. `None` means unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelConstants {
    /// Lipschitz constant of the transport kernel in each opinion argument.
    pub c_k: Option<f64>,
    /// Lipschitz constant of the mobility kernel.
    pub c_a: Option<f64>,
    /// Lipschitz constant of the first-argument derivative of the mobility.
    pub c_1a: Option<f64>,
    /// Bound on the norm of a single pair's node velocity.
    pub v_sup: Option<f64>,
    /// Lipschitz constant of a single pair's node velocity in the node positions.
    pub v_lip: Option<f64>,
}

/// What the kernels can see of one agent.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub particles: &'a [f64],
    pub node: &'a [f64],
    pub mass: f64,
    pub sigma_n: f64,
    pub mean: f64,
    pub particle_sum: f64,
}

/// Agent pair `(i, j)` as passed to pointwise kernels.
#[derive(Debug, Clone, Copy)]
pub struct Pair<'a> {
    pub i: usize,
    pub j: usize,
    pub mean_i: f64,
    pub mean_j: f64,
    pub node_i: &'a [f64],
    pub node_j: &'a [f64],
    pub distance: f64,
}

/// All agents plus their pairwise node distances.
#[derive(Debug, Clone)]
pub struct Configuration<'a> {
    pub agents: Vec<AgentView<'a>>,
    distances: Vec<f64>,
}

impl<'a> Configuration<'a> {
    pub fn from_state(state: &'a crate::state::ParticleState) -> Self {
        let m = state.n_agents();
        let agents: Vec<_> = (0..m)
            .map(|i| {
                let particles = state.particles(i);
                let particle_sum: f64 = particles.iter().sum();
                AgentView {
                    particles,
                    node: state.node(i),
                    mass: state.mass(i),
                    sigma_n: state.sigma_n(i),
                    mean: particle_sum / particles.len() as f64,
                    particle_sum,
                }
            })
            .collect();
        let mut distances = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = euclidean(agents[i].node, agents[j].node);
                distances[i * m + j] = d;
                distances[j * m + i] = d;
            }
        }
        Configuration { agents, distances }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.agents.len() + j]
    }

    pub fn pair(&self, i: usize, j: usize) -> Pair<'a> {
        let (ai, aj) = (&self.agents[i], &self.agents[j]);
        Pair {
            i,
            j,
            mean_i: ai.mean,
            mean_j: aj.mean,
            node_i: ai.node,
            node_j: aj.node,
            distance: self.distance(i, j),
        }
    }
}

/// Transport kernel K, mobility kernel A and node velocity V.
pub trait Interaction: Send + Sync {
    /// Transport kernel evaluated at opinions `w` (agent i) and `v` (agent j).
    fn transport(&self, w: f64, v: f64, pair: &Pair<'_>) -> f64;

    /// Diffusion mobility; must be nonnegative.
    fn mobility(&self, w: f64, v: f64, pair: &Pair<'_>) -> f64;

    /// Adds the velocity of node i induced by node j to `out`.
    fn node_velocity(&self, pair: &Pair<'_>, out: &mut [f64]);

    fn constants(&self) -> KernelConstants {
        KernelConstants::default()
    }

    /// Writes the transport sum at every particle of agent `i` into `out`.
    fn transport_row(&self, i: usize, cfg: &Configuration<'_>, out: &mut [f64]) {
        let xi = cfg.agents[i].particles;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, aj) in cfg.agents.iter().enumerate() {
            let pair = cfg.pair(i, j);
            for (o, &w) in out.iter_mut().zip(xi) {
                let s: f64 = aj.particles.iter().map(|&v| self.transport(w, v, &pair)).sum();
                *o += aj.sigma_n * s;
            }
        }
    }

    /// Writes the mobility sum at every particle of agent `i` into `out`.
    fn mobility_row(&self, i: usize, cfg: &Configuration<'_>, out: &mut [f64]) {
        let xi = cfg.agents[i].particles;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, aj) in cfg.agents.iter().enumerate() {
            let pair = cfg.pair(i, j);
            for (o, &w) in out.iter_mut().zip(xi) {
                let s: f64 = aj.particles.iter().map(|&v| self.mobility(w, v, &pair)).sum();
                *o += aj.sigma_n * s;
            }
        }
    }

    /// Writes the total node velocity of agent `i` into `out`.
    fn node_velocity_row(&self, i: usize, cfg: &Configuration<'_>, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..cfg.len() {
            self.node_velocity(&cfg.pair(i, j), out);
        }
    }
}

/// Attitude-area model: `K = omega zeta (v - w)`, `A = (mu_j - w)^2`,
/// `V = zeta omega (a_j - a_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelKernels {
    pub attitude: AttitudeParams,
    pub radius: InteractionRadius,
    pub sign: NodeVelocitySign,
}

impl ModelKernels {
    pub fn new(attitude: AttitudeParams, radius: InteractionRadius) -> Self {
        ModelKernels {
            attitude,
            radius,
            sign: NodeVelocitySign::Attract,
        }
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        ModelKernels {
            attitude: scenario.attitude,
            radius: scenario.interaction_radius,
            sign: scenario.node_velocity,
        }
    }

    #[inline]
    fn coupling(&self, pair_mean_diff: f64, distance: f64) -> f64 {
        if self.radius.contains(distance) {
            attitude_zeta(pair_mean_diff, &self.attitude)
        } else {
            0.0
        }
    }
}

impl Interaction for ModelKernels {
    fn transport(&self, w: f64, v: f64, pair: &Pair<'_>) -> f64 {
        kernel_k_model(w, v, pair.mean_i, pair.mean_j, pair.distance, &self.attitude, self.radius)
    }

    fn mobility(&self, w: f64, _v: f64, pair: &Pair<'_>) -> f64 {
        mobility_a_model(w, pair.mean_j)
    }

    fn node_velocity(&self, pair: &Pair<'_>, out: &mut [f64]) {
        let c = self.coupling(pair.mean_i - pair.mean_j, pair.distance) * orientation(self.sign);
        for ((o, ai), aj) in out.iter_mut().zip(pair.node_i).zip(pair.node_j) {
            *o += c * (aj - ai);
        }
    }

    fn constants(&self) -> KernelConstants {
        let zmax = zeta_sup(&self.attitude);
        KernelConstants {
            c_k: Some(zmax),
            // |d/dw (mu - w)^2| <= 2 |Omega|
            c_a: Some(2.0 * OMEGA_LEN),
            c_1a: Some(2.0),
            v_sup: self.radius.finite().map(|r| zmax * r),
            v_lip: Some(2.0 * zmax),
        }
    }

    // sum_j sigma_N^j omega zeta sum_l (x^j_l - w) is affine in w.
    fn transport_row(&self, i: usize, cfg: &Configuration<'_>, out: &mut [f64]) {
        let ai = &cfg.agents[i];
        let (mut offset, mut slope) = (0.0, 0.0);
        for (j, aj) in cfg.agents.iter().enumerate() {
            let c = self.coupling(ai.mean - aj.mean, cfg.distance(i, j));
            if c != 0.0 {
                let w = c * aj.sigma_n;
                offset += w * aj.particle_sum;
                slope += w * aj.particles.len() as f64;
            }
        }
        for (o, &x) in out.iter_mut().zip(ai.particles) {
            *o = offset - slope * x;
        }
    }

    // sum_j sigma_N^j (N+1) (mu_j - w)^2 = total (w - centre)^2 + spread.
    fn mobility_row(&self, i: usize, cfg: &Configuration<'_>, out: &mut [f64]) {
        let weights: Vec<f64> = cfg
            .agents
            .iter()
            .map(|a| a.sigma_n * a.particles.len() as f64)
            .collect();
        let total: f64 = weights.iter().sum();
        let centre = cfg.agents.iter().zip(&weights).map(|(a, w)| w * a.mean).sum::<f64>() / total;
        let spread: f64 = cfg
            .agents
            .iter()
            .zip(&weights)
            .map(|(a, w)| w * (a.mean - centre) * (a.mean - centre))
            .sum();
        for (o, &x) in out.iter_mut().zip(cfg.agents[i].particles) {
            *o = total * (x - centre) * (x - centre) + spread;
        }
    }
}
