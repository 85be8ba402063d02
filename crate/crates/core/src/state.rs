use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{OMEGA_MAX, OMEGA_MIN};

/// Opinion particles and network nodes of all agents at one instant.
///
/// Particles are stored agent-major: agent `i` owns
/// `x[i * (n + 1) .. (i + 1) * (n + 1)]`, with the first and last entry pinned
/// to the ends of the opinion space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub t: f64,
    n: usize,
    dim: usize,
    x: Vec<f64>,
    a: Vec<f64>,
    masses: Vec<f64>,
}

impl ParticleState {
    /// Assemble a state from per-agent particle rows and node positions.
    pub fn new(t: f64, rows: Vec<Vec<f64>>, nodes: Vec<Vec<f64>>, masses: Vec<f64>) -> Self {
        assert!(!rows.is_empty(), "state needs at least one agent");
        assert_eq!(rows.len(), nodes.len());
        assert_eq!(rows.len(), masses.len());
        let n = rows[0].len() - 1;
        let dim = nodes[0].len();
        assert!(rows.iter().all(|r| r.len() == n + 1), "ragged particle rows");
        assert!(nodes.iter().all(|a| a.len() == dim), "ragged node positions");
        ParticleState {
            t,
            n,
            dim,
            x: rows.concat(),
            a: nodes.concat(),
            masses,
        }
    }

    /// Reset every agent's end particles to the ends of the opinion space.
    pub(crate) fn pin_boundaries(&mut self) {
        for row in self.x.chunks_mut(self.n + 1) {
            row[0] = OMEGA_MIN;
            row[self.n] = OMEGA_MAX;
        }
    }

    pub fn n_agents(&self) -> usize {
        self.masses.len()
    }

    /// Number of particle intervals per agent (particles are `n + 1`).
    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particles(&self, i: usize) -> &[f64] {
        &self.x[i * (self.n + 1)..(i + 1) * (self.n + 1)]
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass carried by each particle interval of agent `i`.
    pub fn sigma_n(&self, i: usize) -> f64 {
        self.masses[i] / self.n as f64
    }

    pub fn flat_particles(&self) -> &[f64] {
        &self.x
    }

    pub fn flat_nodes(&self) -> &[f64] {
        &self.a
    }

    pub(crate) fn flat_parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.a)
    }

    /// Smallest particle gap over all agents.
    pub fn min_gap(&self) -> f64 {
        (0..self.n_agents())
            .flat_map(|i| self.particles(i).windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_gap(&self) -> f64 {
        (0..self.n_agents())
            .flat_map(|i| self.particles(i).windows(2).map(|w| w[1] - w[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fails on the first non-increasing (or non-finite) pair of particles.
    pub fn check_ordering(&self) -> Result<()> {
        for i in 0..self.n_agents() {
            for (k, w) in self.particles(i).windows(2).enumerate() {
                if !(w[1] > w[0]) {
                    return Err(Error::NotIncreasing { agent: i, index: k });
                }
            }
        }
        Ok(())
    }

    /// Discrete mean opinion of every agent.
    pub fn means(&self) -> Vec<f64> {
        (0..self.n_agents())
            .map(|i| crate::dpa::discrete_mean(self.particles(i)))
            .collect()
    }
}
