//! Self-convergence tables: one realized scenario simulated at increasing
//! particle counts, final states compared between consecutive counts.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dpa_core::kernels::euclidean;
use dpa_core::transport::{empirical_wasserstein_gap, reconstruct, wasserstein1};
use dpa_core::{simulate, Scenario, Trajectory};

use crate::{prepare_scenario, CliError, CliResult, Overrides};

pub const TABLE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "convergence_summary.csv";

/// Final-state discrepancy of one agent between two particle counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub agent: usize,
    pub w1: f64,
    pub node_discrepancy: f64,
    /// Distance between the coarse reconstruction and its empirical measure.
    pub empirical_gap: f64,
    /// `sigma / N` for the coarse level.
    pub empirical_gap_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub max_w1: f64,
    pub mean_w1: f64,
    pub max_node_discrepancy: f64,
    /// `max_w1` over the previous level's `max_w1`.
    pub w1_ratio: Option<f64>,
    pub node_ratio: Option<f64>,
}

fn compare(coarse: &Trajectory, fine: &Trajectory) -> CliResult<Vec<ConvergenceRow>> {
    let (a, b) = (coarse.last(), fine.last());
    let (na, nb) = (a.n_intervals(), b.n_intervals());
    (0..a.n_agents())
        .map(|i| {
            let da = reconstruct(a.particles(i), a.sigma_n(i))?;
            let db = reconstruct(b.particles(i), b.sigma_n(i))?;
            Ok(ConvergenceRow {
                n_coarse: na,
                n_fine: nb,
                agent: i,
                w1: wasserstein1(&da, &db)?,
                node_discrepancy: euclidean(a.node(i), b.node(i)),
                empirical_gap: empirical_wasserstein_gap(a.particles(i), a.sigma_n(i))?,
                empirical_gap_bound: a.mass(i) / na as f64,
            })
        })
        .collect::<dpa_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

/// Simulate `scenario` at every level and compare consecutive levels.
pub fn converge(scenario: &Scenario, levels: &[usize]) -> CliResult<(Vec<ConvergenceRow>, Vec<ConvergenceSummary>)> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Input(format!(
            "levels must be strictly ascending with at least two entries, got {levels:?}"
        )));
    }
    let realized = scenario.realized();
    let runs: Vec<Trajectory> = levels
        .par_iter()
        .map(|&n| {
            let mut s = realized.clone();
            s.run.n_particles = n;
            crate::check(&s)?;
            simulate(&s).map_err(CliError::from)
        })
        .collect::<CliResult<_>>()?;

    let mut rows = Vec::new();
    let mut summary: Vec<ConvergenceSummary> = Vec::new();
    for pair in runs.windows(2) {
        let block = compare(&pair[0], &pair[1])?;
        let max_w1 = block.iter().map(|r| r.w1).fold(0.0, f64::max);
        let mean_w1 = block.iter().map(|r| r.w1).sum::<f64>() / block.len() as f64;
        let max_node = block.iter().map(|r| r.node_discrepancy).fold(0.0, f64::max);
        let prev = summary.last();
        summary.push(ConvergenceSummary {
            n_coarse: block[0].n_coarse,
            n_fine: block[0].n_fine,
            max_w1,
            mean_w1,
            max_node_discrepancy: max_node,
            w1_ratio: prev.map(|p| max_w1 / p.max_w1),
            node_ratio: prev.map(|p| max_node / p.max_node_discrepancy),
        });
        rows.extend(block);
    }
    Ok((rows, summary))
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> CliResult<()> {
    let runtime = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    for r in rows {
        w.serialize(r).map_err(runtime)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes `convergence.csv` (per agent) and `convergence_summary.csv`.
pub fn cmd_converge(
    scenario_path: &Path,
    levels: &[usize],
    out_dir: &Path,
    overrides: &Overrides,
) -> CliResult<Vec<ConvergenceSummary>> {
    let scenario = prepare_scenario(scenario_path, overrides)?;
    let (rows, summary) = converge(&scenario, levels)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    write_csv(&out_dir.join(TABLE_FILE), &rows)?;
    write_csv(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
