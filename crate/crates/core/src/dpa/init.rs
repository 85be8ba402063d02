use crate::error::{Error, Result};
use crate::scenario::{DensitySpec, Scenario, OMEGA_MAX, OMEGA_MIN};
use crate::state::ParticleState;

const MASS_TOL: f64 = 1e-12;

/// Points `-1 = x_0 < ... < x_N = 1` splitting the density into `N` pieces of
/// mass `mass / N`, found by bisection on the cumulative mass.
pub fn quantile_partition(density: &DensitySpec, mass: f64, n: usize) -> Result<Vec<f64>> {
    let (lo_bound, hi_bound) = density.bounds(mass);
    if !(lo_bound > 0.0 && hi_bound.is_finite()) {
        return Err(Error::DegenerateDensity);
    }
    let mut x = Vec::with_capacity(n + 1);
    x.push(OMEGA_MIN);
    let mut lo = OMEGA_MIN;
    for k in 1..n {
        let target = mass * k as f64 / n as f64;
        let mut a = lo;
        let mut b = OMEGA_MAX;
        let mut mid = 0.5 * (a + b);
        for _ in 0..200 {
            mid = 0.5 * (a + b);
            let f = density.cumulative(mid, mass) - target;
            if f.abs() <= MASS_TOL || mid <= a || mid >= b {
                break;
            }
            if f < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        if !(mid > lo && mid < OMEGA_MAX) {
            return Err(Error::DegenerateDensity);
        }
        x.push(mid);
        lo = mid;
    }
    x.push(OMEGA_MAX);
    Ok(x)
}

/// State at `t = 0`. Sampled scenarios are realized with their own seed first.
pub fn initial_state(scenario: &Scenario) -> Result<ParticleState> {
    let realized = scenario.realized();
    let n = realized.run.n_particles;
    let rows = realized
        .agents
        .iter()
        .map(|a| quantile_partition(&a.density, a.mass, n))
        .collect::<Result<Vec<_>>>()?;
    let nodes = realized.agents.iter().map(|a| a.position.clone()).collect();
    let masses = realized.agents.iter().map(|a| a.mass).collect();
    Ok(ParticleState::new(0.0, rows, nodes, masses))
}
