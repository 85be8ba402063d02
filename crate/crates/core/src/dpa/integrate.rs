use serde::{Deserialize, Serialize};

use super::{initial_state, Derivative, Dynamics};
use crate::error::{Error, Result};
use crate::kernels::Interaction;
use crate::scenario::{validate, IntegratorKind, Scenario, STATIONARY_SPEED, STATIONARY_STEPS};
use crate::state::ParticleState;

/// Largest number of consecutive step halvings before giving up.
pub const MAX_HALVINGS: u32 = 20;

/// Fraction of the RK4 stability interval on the negative real axis used for
/// sub-steps.
const STABILITY_FACTOR: f64 = 2.5;

/// Damping of the Chebyshev stability polynomial.
const CHEBYSHEV_DAMPING: f64 = 2.0 / 13.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    /// Time steps of size `dt` requested by the driver.
    pub steps: u64,
    /// Accepted sub-steps (at least one per step).
    pub substeps: u64,
    /// Sub-steps rejected by the gap guard and retried with half the size.
    pub rejections: u64,
    pub rhs_evaluations: u64,
}

/// Snapshots of one run together with the realized scenario that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub snapshots: Vec<ParticleState>,
    /// Largest particle speed observed between snapshot `s` and `s + 1`.
    pub max_speed: Vec<f64>,
    pub stats: IntegratorStats,
    /// Whether the run ended before `t_final` because particles stopped moving.
    pub stationary: bool,
}

impl Trajectory {
    pub fn initial(&self) -> &ParticleState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ParticleState {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

type Stepper<K> = fn(&Dynamics<K>, &ParticleState, f64, &mut Probe) -> Option<ParticleState>;

#[derive(Default)]
struct Probe {
    speed: f64,
    evals: u64,
}

fn displaced(state: &ParticleState, parts: &[(&Derivative, f64)]) -> ParticleState {
    let mut next = state.clone();
    let (x, a) = next.flat_parts_mut();
    for (d, h) in parts {
        for (xi, v) in x.iter_mut().zip(&d.dx) {
            *xi += h * v;
        }
        for (ai, v) in a.iter_mut().zip(&d.da) {
            *ai += h * v;
        }
    }
    next
}

/// Recurrence coefficients of the second-order Runge-Kutta-Chebyshev method
/// with `s` stages, indexed by stage.
struct Chebyshev {
    mu: Vec<f64>,
    nu: Vec<f64>,
    mu_t: Vec<f64>,
    gamma_t: Vec<f64>,
}

impl Chebyshev {
    /// Stages needed for a step `h` on a problem with spectral radius `lambda`.
    fn stages(h: f64, lambda: f64) -> usize {
        (1 + (1.54 * h * lambda + 1.0).sqrt() as usize).max(2)
    }

    fn new(s: usize) -> Self {
        let w0 = 1.0 + CHEBYSHEV_DAMPING / (s * s) as f64;
        let (mut t, mut dt, mut ddt) = (vec![0.0; s + 1], vec![0.0; s + 1], vec![0.0; s + 1]);
        t[0] = 1.0;
        t[1] = w0;
        dt[1] = 1.0;
        for j in 2..=s {
            t[j] = 2.0 * w0 * t[j - 1] - t[j - 2];
            dt[j] = 2.0 * t[j - 1] + 2.0 * w0 * dt[j - 1] - dt[j - 2];
            ddt[j] = 4.0 * dt[j - 1] + 2.0 * w0 * ddt[j - 1] - ddt[j - 2];
        }
        let w1 = dt[s] / ddt[s];
        let mut b: Vec<f64> = (0..=s).map(|j| if j < 2 { 0.0 } else { ddt[j] / (dt[j] * dt[j]) }).collect();
        b[0] = b[2];
        b[1] = b[2];
        let (mut mu, mut nu, mut mu_t, mut gamma_t) = (vec![0.0; s + 1], vec![0.0; s + 1], vec![0.0; s + 1], vec![0.0; s + 1]);
        mu_t[1] = b[1] * w1;
        for j in 2..=s {
            mu[j] = 2.0 * b[j] * w0 / b[j - 1];
            nu[j] = -b[j] / b[j - 2];
            mu_t[j] = 2.0 * b[j] * w1 / b[j - 1];
            gamma_t[j] = -(1.0 - b[j - 1] * t[j - 1]) * mu_t[j];
        }
        Chebyshev { mu, nu, mu_t, gamma_t }
    }
}

impl<K: Interaction> Dynamics<K> {
    fn eval(&self, state: &ParticleState, probe: &mut Probe) -> Option<Derivative> {
        probe.evals += 1;
        let d = self.rhs(state).ok()?;
        probe.speed = probe.speed.max(d.max_speed());
        Some(d)
    }

    fn acceptable(&self, state: &ParticleState) -> bool {
        state.flat_particles().iter().all(|v| v.is_finite())
            && state.flat_nodes().iter().all(|v| v.is_finite())
            && state.min_gap() >= self.min_gap
    }

    fn raw_rk4(&self, s: &ParticleState, h: f64, probe: &mut Probe) -> Option<ParticleState> {
        let k1 = self.eval(s, probe)?;
        let k2 = self.eval(&displaced(s, &[(&k1, 0.5 * h)]), probe)?;
        let k3 = self.eval(&displaced(s, &[(&k2, 0.5 * h)]), probe)?;
        let k4 = self.eval(&displaced(s, &[(&k3, h)]), probe)?;
        let w = h / 6.0;
        let mut next = displaced(s, &[(&k1, w), (&k2, 2.0 * w), (&k3, 2.0 * w), (&k4, w)]);
        next.t = s.t + h;
        self.acceptable(&next).then_some(next)
    }

    fn raw_chebyshev(&self, s: &ParticleState, h: f64, probe: &mut Probe) -> Option<ParticleState> {
        let stages = Chebyshev::stages(h, self.stiffness(s));
        let c = Chebyshev::new(stages);
        let f0 = self.eval(s, probe)?;
        let mut older = s.clone();
        let mut prev = displaced(s, &[(&f0, c.mu_t[1] * h)]);
        for j in 2..=stages {
            let fj = self.eval(&prev, probe)?;
            let (mu, nu) = (c.mu[j], c.nu[j]);
            let mut next = s.clone();
            {
                let (x, a) = next.flat_parts_mut();
                let blend = |out: &mut [f64], y1: &[f64], y2: &[f64], f1: &[f64], f0: &[f64]| {
                    for k in 0..out.len() {
                        out[k] = (1.0 - mu - nu) * out[k]
                            + mu * y1[k]
                            + nu * y2[k]
                            + c.mu_t[j] * h * f1[k]
                            + c.gamma_t[j] * h * f0[k];
                    }
                };
                blend(x, prev.flat_particles(), older.flat_particles(), &fj.dx, &f0.dx);
                blend(a, prev.flat_nodes(), older.flat_nodes(), &fj.da, &f0.da);
            }
            next.pin_boundaries();
            older = std::mem::replace(&mut prev, next);
        }
        prev.t = s.t + h;
        self.acceptable(&prev).then_some(prev)
    }

    fn raw_euler(&self, s: &ParticleState, h: f64, probe: &mut Probe) -> Option<ParticleState> {
        let k1 = self.eval(s, probe)?;
        let mut next = displaced(s, &[(&k1, h)]);
        next.t = s.t + h;
        self.acceptable(&next).then_some(next)
    }

    fn guarded(
        &self,
        step: Stepper<K>,
        s: &ParticleState,
        h: f64,
        depth: u32,
        stats: &mut IntegratorStats,
        probe: &mut Probe,
    ) -> Result<ParticleState> {
        let mut trial = Probe::default();
        let attempt = step(self, s, h, &mut trial);
        probe.evals += trial.evals;
        if let Some(next) = attempt {
            probe.speed = probe.speed.max(trial.speed);
            stats.substeps += 1;
            return Ok(next);
        }
        stats.rejections += 1;
        if depth >= MAX_HALVINGS {
            return Err(Error::StepCollapse { t: s.t, dt: h });
        }
        let mid = self.guarded(step, s, 0.5 * h, depth + 1, stats, probe)?;
        self.guarded(step, &mid, 0.5 * h, depth + 1, stats, probe)
    }

    fn single(&self, step: Stepper<K>, s: &ParticleState, dt: f64) -> Result<ParticleState> {
        let mut stats = IntegratorStats::default();
        let mut next = self.guarded(step, s, dt, 0, &mut stats, &mut Probe::default())?;
        next.t = s.t + dt;
        Ok(next)
    }

    /// One classical RK4 step of size `dt`, halved (recursively) whenever the
    /// result would leave a gap below `min_gap`.
    pub fn step_rk4(&self, state: &ParticleState, dt: f64) -> Result<ParticleState> {
        self.single(Self::raw_rk4, state, dt)
    }

    /// Forward-Euler counterpart of [`Dynamics::step_rk4`], with the same guard.
    pub fn step_euler(&self, state: &ParticleState, dt: f64) -> Result<ParticleState> {
        self.single(Self::raw_euler, state, dt)
    }

    /// One Runge-Kutta-Chebyshev step of size `dt`, with the same guard.
    pub fn step_chebyshev(&self, state: &ParticleState, dt: f64) -> Result<ParticleState> {
        self.single(Self::raw_chebyshev, state, dt)
    }

    /// Advance by `dt`. Returns the new state and the largest particle speed
    /// seen on the way.
    ///
    /// With [`IntegratorKind::Rk4`] the interval is cut into sub-steps inside
    /// the RK4 stability region of the diffusion part; with
    /// [`IntegratorKind::Chebyshev`] a single step is taken whose stage count
    /// covers the stiffness.
    pub fn advance(
        &self,
        state: &ParticleState,
        dt: f64,
        kind: IntegratorKind,
        stats: &mut IntegratorStats,
    ) -> Result<(ParticleState, f64)> {
        let t_end = state.t + dt;
        let mut probe = Probe::default();
        stats.steps += 1;
        if kind == IntegratorKind::Chebyshev {
            let mut next = self.guarded(Self::raw_chebyshev, state, dt, 0, stats, &mut probe)?;
            next.t = t_end;
            stats.rhs_evaluations += probe.evals;
            return Ok((next, probe.speed));
        }
        let mut cur = state.clone();
        let mut remaining = dt;
        while remaining > 0.0 {
            let limit = STABILITY_FACTOR / self.stiffness(&cur);
            // avoid a sliver step at the end of the interval
            let h = if limit >= 0.999 * remaining { remaining } else { limit };
            cur = self.guarded(Self::raw_rk4, &cur, h, 0, stats, &mut probe)?;
            remaining -= h;
        }
        cur.t = t_end;
        stats.rhs_evaluations += probe.evals;
        Ok((cur, probe.speed))
    }
}

/// Run a validated scenario with the model kernels.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    simulate_with(scenario, &Dynamics::from_scenario(scenario))
}

/// Run a scenario with arbitrary kernels; run controls come from the scenario.
pub fn simulate_with<K: Interaction>(scenario: &Scenario, dynamics: &Dynamics<K>) -> Result<Trajectory> {
    let violations = validate(scenario);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    let scenario = scenario.realized();
    let run = scenario.run;
    let mut state = initial_state(&scenario)?;
    let mut traj = Trajectory {
        scenario,
        snapshots: vec![state.clone()],
        max_speed: Vec::new(),
        stats: IntegratorStats::default(),
        stationary: false,
    };
    if run.t_final <= 0.0 {
        return Ok(traj);
    }
    let n_steps = ((run.t_final / run.dt).round() as u64).max(1);
    let stride = ((run.snapshot_every / run.dt).round() as u64).max(1);
    let mut interval_speed: f64 = 0.0;
    let mut quiet = 0usize;
    for step in 1..=n_steps {
        let t_next = if step == n_steps { run.t_final } else { step as f64 * run.dt };
        let (mut next, speed) = dynamics.advance(&state, t_next - state.t, run.integrator, &mut traj.stats)?;
        next.t = t_next;
        state = next;
        interval_speed = interval_speed.max(speed);
        quiet = if speed < STATIONARY_SPEED { quiet + 1 } else { 0 };
        let stop = run.stop_when_stationary && quiet >= STATIONARY_STEPS;
        if step % stride == 0 || step == n_steps || stop {
            traj.snapshots.push(state.clone());
            traj.max_speed.push(interval_speed);
            interval_speed = 0.0;
        }
        if stop {
            traj.stationary = true;
            break;
        }
    }
    Ok(traj)
}
