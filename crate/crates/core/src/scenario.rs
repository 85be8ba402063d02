//! Experiment description, validation and realization of random initial data.
//!
//! A [`Scenario`] either lists its agents explicitly or carries a
//! [`SamplingSpec`] from which agents are drawn with the scenario seed. Runs
//! always operate on a *realized* scenario (explicit agents only), which is
//! what gets persisted so that a run can be replayed without the generator.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

/// Opinion space is the fixed interval [-1, 1].
pub const OMEGA_MIN: f64 = -1.0;
pub const OMEGA_MAX: f64 = 1.0;
pub const OMEGA_LEN: f64 = OMEGA_MAX - OMEGA_MIN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentInit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub attitude: AttitudeParams,
    #[serde(default)]
    pub interaction_radius: InteractionRadius,
    #[serde(default = "default_true")]
    pub diffusion_enabled: bool,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default = "default_network_dim")]
    pub network_dim: usize,
    #[serde(default)]
    pub node_velocity: NodeVelocitySign,
    /// Width of a layer at each end of the opinion space in which outward
    /// transport is damped by `((1 - |x|) / width)^2`. Unset means the plain
    /// scheme with pinned end particles, which breaks down without diffusion
    /// once transport points out of the opinion space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_boundary_layer: Option<f64>,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_network_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentInit {
    pub mass: f64,
    pub density: DensitySpec,
    pub position: Vec<f64>,
}

/// Initial opinion density profile on [-1, 1], before scaling to the agent mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// Gaussian restricted to [-1, 1]. `variance` is the variance of the
    /// untruncated Gaussian.
    TruncatedGaussian { mean: f64, variance: f64 },
    /// Samples on the uniform grid `-1 + 2 i / (len - 1)`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeParams {
    pub r_f: f64,
    pub r_a: f64,
    pub r_r: f64,
    pub r_l: f64,
}

impl AttitudeParams {
    pub const BLUE: AttitudeParams = AttitudeParams::new(0.15, 0.20, 0.30, 0.40);
    pub const BLACK: AttitudeParams = AttitudeParams::new(0.25, 0.34, 0.36, 0.65);
    pub const RED: AttitudeParams = AttitudeParams::new(0.30, 0.45, 0.55, 0.70);
    pub const OLIVE: AttitudeParams = AttitudeParams::new(0.40, 0.80, 1.20, 1.60);

    pub const fn new(r_f: f64, r_a: f64, r_r: f64, r_l: f64) -> Self {
        AttitudeParams { r_f, r_a, r_r, r_l }
    }

    /// Named parameter sets: `blue`, `black`, `red`, `olive`.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "blue" => Some(Self::BLUE),
            "black" => Some(Self::BLACK),
            "red" => Some(Self::RED),
            "olive" => Some(Self::OLIVE),
            _ => None,
        }
    }

    pub fn radii(&self) -> [f64; 4] {
        [self.r_f, self.r_a, self.r_r, self.r_l]
    }
}

impl Default for AttitudeParams {
    fn default() -> Self {
        Self::BLACK
    }
}

/// Network interaction radius; `Infinite` means every pair interacts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RadiusRepr", into = "RadiusRepr")]
pub enum InteractionRadius {
    Finite(f64),
    #[default]
    Infinite,
}

impl InteractionRadius {
    pub fn contains(&self, distance: f64) -> bool {
        match *self {
            InteractionRadius::Finite(r) => distance <= r,
            InteractionRadius::Infinite => true,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            InteractionRadius::Finite(r) => Some(r),
            InteractionRadius::Infinite => None,
        }
    }
}

impl fmt::Display for InteractionRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InteractionRadius::Finite(r) => write!(f, "{r}"),
            InteractionRadius::Infinite => f.write_str("infinite"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusRepr {
    Number(f64),
    Word(String),
}

impl TryFrom<RadiusRepr> for InteractionRadius {
    type Error = String;

    fn try_from(value: RadiusRepr) -> Result<Self, Self::Error> {
        match value {
            RadiusRepr::Number(r) => Ok(InteractionRadius::Finite(r)),
            RadiusRepr::Word(w) if matches!(w.as_str(), "infinite" | "inf" | "infinity") => {
                Ok(InteractionRadius::Infinite)
            }
            RadiusRepr::Word(w) => Err(format!(
                "interaction_radius must be a number or \"infinite\", got {w:?}"
            )),
        }
    }
}

impl From<InteractionRadius> for RadiusRepr {
    fn from(value: InteractionRadius) -> Self {
        match value {
            InteractionRadius::Finite(r) => RadiusRepr::Number(r),
            InteractionRadius::Infinite => RadiusRepr::Word("infinite".into()),
        }
    }
}

/// Nonlinear diffusion map. `Power` evaluates `min(rho, rho_max)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    #[default]
    Linear,
    Power { exponent: f64, rho_max: f64 },
}

/// Direction of the node velocity for positive attitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeVelocitySign {
    /// Positive attitude pulls node i toward node j: `a_j - a_i`.
    #[default]
    Attract,
    /// The literal `a_i - a_j` orientation: positive attitude pushes nodes apart.
    Repel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub n_particles: usize,
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_every: f64,
    pub min_gap: f64,
    /// Stop early once the fastest particle stays below
    /// [`STATIONARY_SPEED`] for [`STATIONARY_STEPS`] consecutive steps.
    pub stop_when_stationary: bool,
    pub integrator: IntegratorKind,
}

/// Time stepping used between output times. Both are explicit; steps leaving a
/// particle gap below `min_gap` are halved and retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    /// Second-order Runge-Kutta-Chebyshev steps of size `dt`, with as many
    /// stages as the stiffness of the diffusion requires.
    #[default]
    Chebyshev,
    /// Classical RK4, sub-stepping `dt` to stay inside its stability region.
    Rk4,
}

pub const STATIONARY_SPEED: f64 = 1e-4;
pub const STATIONARY_STEPS: usize = 100;

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            n_particles: 100,
            t_final: 2.0,
            dt: 1e-3,
            snapshot_every: 0.1,
            min_gap: 1e-13,
            stop_when_stationary: false,
            integrator: IntegratorKind::Chebyshev,
        }
    }
}

/// Recipe for drawing random agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub n_agents: usize,
    /// Each node coordinate is uniform in `[box_min, box_max]`.
    pub box_min: f64,
    pub box_max: f64,
    pub mean_range: [f64; 2],
    pub variance_range: [f64; 2],
    pub mass: f64,
    /// Relative mass perturbation: `mass * (1 + jitter * U(-1, 1))`.
    pub mass_jitter: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            n_agents: 40,
            box_min: 0.0,
            box_max: 10.0,
            mean_range: [-0.7, 0.7],
            variance_range: [0.07, 0.15],
            mass: 1.0,
            mass_jitter: 0.0,
        }
    }
}

impl Scenario {
    /// A sampled scenario with the default agent recipe and run controls.
    pub fn sampled(attitude: AttitudeParams, radius: InteractionRadius, seed: u64) -> Self {
        Scenario {
            agents: Vec::new(),
            sampling: Some(SamplingSpec::default()),
            attitude,
            interaction_radius: radius,
            diffusion_enabled: true,
            phi: PhiSpec::Linear,
            network_dim: 2,
            node_velocity: NodeVelocitySign::Attract,
            transport_boundary_layer: None,
            run: RunParams::default(),
            seed,
        }
    }

    /// Replace any sampling recipe by the agents it produces for `self.seed`.
    pub fn realized(&self) -> Scenario {
        let mut out = self.clone();
        out.agents = sample_initial_conditions(self, self.seed);
        out.sampling = None;
        out
    }

    pub fn is_realized(&self) -> bool {
        self.sampling.is_none()
    }

    pub fn n_agents(&self) -> usize {
        match &self.sampling {
            Some(s) if self.agents.is_empty() => s.n_agents,
            _ => self.agents.len(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.agents.iter().map(|a| a.mass).sum()
    }
}

impl DensitySpec {
    /// Density scaled to total mass `mass` on [-1, 1].
    pub fn eval(&self, x: f64, mass: f64) -> f64 {
        match self {
            DensitySpec::TruncatedGaussian { mean, variance } => {
                let s = variance.sqrt();
                let z = (x - mean) / s;
                let norm = normal_mass((OMEGA_MIN - mean) / s, (OMEGA_MAX - mean) / s);
                mass * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * norm)
            }
            DensitySpec::Tabulated { values } => {
                let table = Table::new(values);
                mass * table.eval(x) / table.total
            }
        }
    }

    /// Mass in `[-1, x]` for a density of total mass `mass`.
    pub fn cumulative(&self, x: f64, mass: f64) -> f64 {
        let x = x.clamp(OMEGA_MIN, OMEGA_MAX);
        match self {
            DensitySpec::TruncatedGaussian { mean, variance } => {
                let s = variance.sqrt();
                let lo = (OMEGA_MIN - mean) / s;
                let norm = normal_mass(lo, (OMEGA_MAX - mean) / s);
                mass * normal_mass(lo, (x - mean) / s) / norm
            }
            DensitySpec::Tabulated { values } => {
                let table = Table::new(values);
                mass * table.cumulative(x) / table.total
            }
        }
    }

    /// Infimum and supremum of the density (scaled to `mass`) over [-1, 1].
    pub fn bounds(&self, mass: f64) -> (f64, f64) {
        match self {
            DensitySpec::TruncatedGaussian { mean, .. } => {
                let far = if *mean >= 0.0 { OMEGA_MIN } else { OMEGA_MAX };
                let peak = mean.clamp(OMEGA_MIN, OMEGA_MAX);
                (self.eval(far, mass), self.eval(peak, mass))
            }
            DensitySpec::Tabulated { values } => {
                let table = Table::new(values);
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mass * lo / table.total, mass * hi / table.total)
            }
        }
    }

    fn check(&self) -> Option<String> {
        match self {
            DensitySpec::TruncatedGaussian { mean, variance } => {
                if !(mean.is_finite() && *mean > OMEGA_MIN && *mean < OMEGA_MAX) {
                    Some(format!("gaussian mean {mean} outside (-1, 1)"))
                } else if !(variance.is_finite() && *variance > 0.0) {
                    Some(format!("gaussian variance {variance} must be positive"))
                } else {
                    None
                }
            }
            DensitySpec::Tabulated { values } => {
                if values.len() < 2 {
                    Some("tabulated density needs at least two samples".into())
                } else if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    Some("tabulated density samples must be finite and strictly positive".into())
                } else {
                    None
                }
            }
        }
    }
}

/// Standard normal mass of `[a, b]`, evaluated without cancellation in the tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * r) - erfc(b * r))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * r) - erfc(-a * r))
    } else {
        0.5 * (erf(b * r) - erf(a * r))
    }
}

struct Table<'a> {
    values: &'a [f64],
    h: f64,
    total: f64,
}

impl<'a> Table<'a> {
    fn new(values: &'a [f64]) -> Self {
        let h = OMEGA_LEN / (values.len() - 1) as f64;
        let total = values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        Table { values, h, total }
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let cells = self.values.len() - 1;
        let pos = ((x - OMEGA_MIN) / self.h).max(0.0);
        let idx = (pos.floor() as usize).min(cells - 1);
        (idx, x - (OMEGA_MIN + idx as f64 * self.h))
    }

    fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.cell(x);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * t / self.h
    }

    fn cumulative(&self, x: f64) -> f64 {
        let (i, t) = self.cell(x);
        let whole: f64 = self.values[..=i]
            .windows(2)
            .map(|w| 0.5 * self.h * (w[0] + w[1]))
            .sum();
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        whole + v0 * t + (v1 - v0) * t * t / (2.0 * self.h)
    }
}

/// Machine-readable category of a scenario defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    NoAgents,
    AmbiguousAgents,
    NonpositiveMass,
    InvalidDensity,
    PositionDimension,
    AttitudeNotIncreasing,
    AttitudeOutOfRange,
    NonpositiveRadius,
    TooFewParticles,
    InvalidFinalTime,
    NonpositiveDt,
    SnapshotOrder,
    NonpositiveMinGap,
    ZeroNetworkDim,
    InvalidPhi,
    InvalidSampling,
    InvalidBoundaryLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Dotted path of the offending field, e.g. `attitude.r_a` or `agents[3].mass`.
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            code,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violated invariant of `scenario`; empty when the scenario is valid.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    match (&scenario.sampling, scenario.agents.is_empty()) {
        (None, true) => out.push(Violation::new(NoAgents, "agents", "at least one agent is required")),
        (Some(_), false) => out.push(Violation::new(
            AmbiguousAgents,
            "sampling",
            "give either explicit agents or a sampling recipe, not both",
        )),
        _ => {}
    }

    if scenario.network_dim == 0 {
        out.push(Violation::new(ZeroNetworkDim, "network_dim", "network dimension must be positive"));
    }

    for (i, agent) in scenario.agents.iter().enumerate() {
        if !(agent.mass.is_finite() && agent.mass > 0.0) {
            out.push(Violation::new(
                NonpositiveMass,
                format!("agents[{i}].mass"),
                "nonpositive mass",
            ));
        }
        if let Some(reason) = agent.density.check() {
            out.push(Violation::new(InvalidDensity, format!("agents[{i}].density"), reason));
        }
        if agent.position.len() != scenario.network_dim
            || agent.position.iter().any(|c| !c.is_finite())
        {
            out.push(Violation::new(
                PositionDimension,
                format!("agents[{i}].position"),
                format!("position must have {} finite coordinates", scenario.network_dim),
            ));
        }
    }

    if let Some(s) = &scenario.sampling {
        let bad = |field: &str, msg: &str| Violation::new(InvalidSampling, format!("sampling.{field}"), msg);
        if s.n_agents == 0 {
            out.push(bad("n_agents", "at least one agent is required"));
        }
        if !(s.box_max > s.box_min) {
            out.push(bad("box_max", "box_max must exceed box_min"));
        }
        let [m0, m1] = s.mean_range;
        if !(m0 <= m1 && m0 > OMEGA_MIN && m1 < OMEGA_MAX) {
            out.push(bad("mean_range", "mean range must be ordered and inside (-1, 1)"));
        }
        let [v0, v1] = s.variance_range;
        if !(v0 <= v1 && v0 > 0.0) {
            out.push(bad("variance_range", "variance range must be ordered and positive"));
        }
        if !(s.mass.is_finite() && s.mass > 0.0) {
            out.push(Violation::new(NonpositiveMass, "sampling.mass", "nonpositive mass"));
        }
        if !(0.0..1.0).contains(&s.mass_jitter) {
            out.push(bad("mass_jitter", "mass jitter must lie in [0, 1)"));
        }
    }

    let p = &scenario.attitude;
    let radii = p.radii();
    if radii.windows(2).any(|w| !(w[0] < w[1])) {
        out.push(Violation::new(
            AttitudeNotIncreasing,
            "attitude",
            "attitude radii not increasing (need r_f < r_a < r_r < r_l)",
        ));
    }
    if !(p.r_f > 0.0) {
        out.push(Violation::new(AttitudeOutOfRange, "attitude.r_f", "r_f must be positive"));
    }
    if !(p.r_l <= OMEGA_LEN) {
        out.push(Violation::new(
            AttitudeOutOfRange,
            "attitude.r_l",
            "r_l must not exceed the diameter 2 of the opinion space",
        ));
    }

    if let InteractionRadius::Finite(r) = scenario.interaction_radius {
        if !(r > 0.0) {
            out.push(Violation::new(
                NonpositiveRadius,
                "interaction_radius",
                "interaction radius must be positive or \"infinite\"",
            ));
        }
    }

    if let PhiSpec::Power { exponent, rho_max } = scenario.phi {
        if !(exponent >= 1.0 && exponent.is_finite()) {
            out.push(Violation::new(InvalidPhi, "phi.exponent", "exponent must be at least 1"));
        }
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            out.push(Violation::new(InvalidPhi, "phi.rho_max", "clamp must be positive and finite"));
        }
    }

    if let Some(w) = scenario.transport_boundary_layer {
        if !(w > 0.0 && w <= 1.0) {
            out.push(Violation::new(
                InvalidBoundaryLayer,
                "transport_boundary_layer",
                "boundary layer width must lie in (0, 1]",
            ));
        }
    }

    let run = &scenario.run;
    if run.n_particles < 2 {
        out.push(Violation::new(TooFewParticles, "run.n_particles", "need at least 2 particle intervals"));
    }
    if !(run.t_final >= 0.0 && run.t_final.is_finite()) {
        out.push(Violation::new(InvalidFinalTime, "run.t_final", "final time must be finite and nonnegative"));
    }
    if !(run.dt > 0.0 && run.dt.is_finite()) {
        out.push(Violation::new(NonpositiveDt, "run.dt", "time step must be positive"));
    }
    if run.t_final > 0.0 && !(run.dt <= run.snapshot_every && run.snapshot_every <= run.t_final) {
        out.push(Violation::new(
            SnapshotOrder,
            "run.snapshot_every",
            "need dt <= snapshot_every <= t_final",
        ));
    }
    if !(run.min_gap > 0.0) {
        out.push(Violation::new(NonpositiveMinGap, "run.min_gap", "minimum gap must be positive"));
    }

    out
}

/// Agents used by a run: the explicit list, or draws from the sampling recipe.
///
/// Draw order per agent is: node coordinates, Gaussian mean, variance, mass
/// jitter. The generator is ChaCha8 seeded with `seed`.
pub fn sample_initial_conditions(scenario: &Scenario, seed: u64) -> Vec<AgentInit> {
    let Some(spec) = &scenario.sampling else {
        return scenario.agents.clone();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    };
    (0..spec.n_agents)
        .map(|_| {
            let position = (0..scenario.network_dim)
                .map(|_| uniform(&mut rng, spec.box_min, spec.box_max))
                .collect();
            let mean = uniform(&mut rng, spec.mean_range[0], spec.mean_range[1]);
            let variance = uniform(&mut rng, spec.variance_range[0], spec.variance_range[1]);
            let jitter = uniform(&mut rng, -1.0, 1.0);
            AgentInit {
                mass: spec.mass * (1.0 + spec.mass_jitter * jitter),
                density: DensitySpec::TruncatedGaussian { mean, variance },
                position,
            }
        })
        .collect()
}
