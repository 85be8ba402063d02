//! Scenario files, snapshot CSVs, plot data and run manifests.
//!
//! Scenarios are JSON with snake_case keys mirroring [`Scenario`]; unknown
//! keys are rejected. Arrays go to CSV, structures to JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dpa::{IntegratorStats, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::euclidean;
use crate::metrics::{histogram, MetricsRecord};
use crate::scenario::{validate, AgentInit, Scenario};
use crate::state::ParticleState;
use crate::transport::reconstruct;

pub const DEFAULT_BINS: usize = 20;

/// Parse a scenario from JSON text; `origin` only labels errors.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let violations = validate(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::InvalidScenario(violations))
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_json(scenario, path)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// SHA-256 of the compact JSON encoding, hex encoded.
pub fn scenario_digest(scenario: &Scenario) -> String {
    let bytes = serde_json::to_vec(scenario).expect("plain data serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Digest of the realized scenario below.
    pub scenario_digest: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub stats: IntegratorStats,
    pub stationary: bool,
    pub snapshot_times: Vec<f64>,
    /// The run's scenario with its sampled agents written out.
    pub scenario: Scenario,
}

impl RunManifest {
    pub fn new(trajectory: &Trajectory, wall_clock_seconds: f64) -> Self {
        RunManifest {
            scenario_digest: scenario_digest(&trajectory.scenario),
            seed: trajectory.scenario.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds,
            stats: trajectory.stats,
            stationary: trajectory.stationary,
            snapshot_times: trajectory.times(),
            scenario: trajectory.scenario.clone(),
        }
    }

    pub fn agents(&self) -> &[AgentInit] {
        &self.scenario.agents
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// `t` with 9 significant digits, fixed notation when reasonable.
pub fn format_time(t: f64) -> String {
    if t == 0.0 {
        return format!("{:.8}", 0.0);
    }
    let e = t.abs().log10().floor() as i32;
    if (-5..9).contains(&e) {
        format!("{:.*}", (8 - e).max(0) as usize, t)
    } else {
        format!("{:.8e}", t)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_rows<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleRow {
    pub agent: usize,
    pub k: usize,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub agent: usize,
    pub dim: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: f64,
    pub polarization_index: f64,
    pub bimodality_gap: f64,
    pub n_clusters: usize,
    pub cluster_opinion_spread: f64,
    pub mean_total_variation: f64,
    pub max_w1_to_initial: f64,
    /// Per-agent mean opinions separated by `;`.
    pub mean_opinions: String,
    /// Histogram counts separated by `;`.
    pub histogram: String,
}

fn joined<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl From<&MetricsRecord> for MetricsRow {
    fn from(r: &MetricsRecord) -> Self {
        let m = r.total_variation.len().max(1) as f64;
        MetricsRow {
            t: r.t,
            polarization_index: r.polarization_index,
            bimodality_gap: r.bimodality_gap,
            n_clusters: r.n_clusters,
            cluster_opinion_spread: r.cluster_opinion_spread,
            mean_total_variation: r.total_variation.iter().sum::<f64>() / m,
            max_w1_to_initial: r.w1_to_initial.iter().copied().fold(0.0, f64::max),
            mean_opinions: joined(&r.mean_opinions),
            histogram: joined(&r.histogram.counts),
        }
    }
}

pub fn particles_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("particles_t{}.csv", format_time(t)))
}

pub fn nodes_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("nodes_t{}.csv", format_time(t)))
}

pub fn write_particles(state: &ParticleState, path: &Path) -> Result<()> {
    let rows = (0..state.n_agents()).flat_map(|i| {
        state
            .particles(i)
            .iter()
            .enumerate()
            .map(move |(k, &x)| ParticleRow { agent: i, k, x })
    });
    write_rows(path, rows)
}

pub fn write_nodes(state: &ParticleState, path: &Path) -> Result<()> {
    let rows = (0..state.n_agents()).flat_map(|i| {
        state
            .node(i)
            .iter()
            .enumerate()
            .map(move |(dim, &value)| NodeRow { agent: i, dim, value })
    });
    write_rows(path, rows)
}

fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| Error::csv(path, e))
}

fn group<R>(rows: Vec<R>, key: impl Fn(&R) -> (usize, usize, f64), path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for row in &rows {
        let (a, j, v) = key(row);
        if a > out.len() || (a == out.len()) != (j == 0) || (a < out.len() && j != out[a].len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("rows out of order at agent {a}, index {j}"),
            });
        }
        if a == out.len() {
            out.push(Vec::new());
        }
        out[a].push(v);
    }
    Ok(out)
}

/// Particle rows of a `particles_t*.csv` file, one vector per agent.
pub fn read_particles(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let rows: Vec<ParticleRow> = read_rows(path)?;
    group(rows, |r| (r.agent, r.k, r.x), path)
}

pub fn read_nodes(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let rows: Vec<NodeRow> = read_rows(path)?;
    group(rows, |r| (r.agent, r.dim, r.value), path)
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    read_rows(path.as_ref())
}

/// Metrics of every snapshot, relative to the first.
pub fn trajectory_metrics(trajectory: &Trajectory, bins: usize) -> Result<Vec<MetricsRecord>> {
    let radius = trajectory.scenario.interaction_radius;
    trajectory
        .snapshots
        .iter()
        .map(|s| MetricsRecord::compute(s, trajectory.initial(), radius, bins))
        .collect()
}

/// Write per-snapshot particle and node files, `metrics.csv` and
/// `manifest.json` into `dir`, creating it if needed.
pub fn write_snapshots(trajectory: &Trajectory, dir: impl AsRef<Path>, bins: usize, wall_clock_seconds: f64) -> Result<RunManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in &trajectory.snapshots {
        write_particles(s, &particles_path(dir, s.t))?;
        write_nodes(s, &nodes_path(dir, s.t))?;
    }
    let records = trajectory_metrics(trajectory, bins)?;
    write_rows(&dir.join("metrics.csv"), records.iter().map(MetricsRow::from))?;
    let manifest = RunManifest::new(trajectory, wall_clock_seconds);
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub t: f64,
    pub agent: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub initial: usize,
    pub final_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub t: f64,
    pub i: usize,
    pub j: usize,
}

/// Plot-ready files for the initial and final snapshots: `densities.csv`,
/// `mean_histogram.csv`, `nodes.csv` (coordinates plus mean opinion) and
/// `edges.csv`.
pub fn write_plot_data(trajectory: &Trajectory, dir: impl AsRef<Path>, bins: usize) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ends = [trajectory.initial(), trajectory.last()];
    let ends: &[&ParticleState] = if trajectory.snapshots.len() == 1 { &ends[..1] } else { &ends };

    let mut densities = Vec::new();
    for s in ends {
        for i in 0..s.n_agents() {
            let d = reconstruct(s.particles(i), s.sigma_n(i))?;
            for (w, &rho) in d.breakpoints().windows(2).zip(d.values()) {
                densities.push(DensityRow {
                    t: s.t,
                    agent: i,
                    x_left: w[0],
                    x_right: w[1],
                    density: rho,
                });
            }
        }
    }
    write_rows(&dir.join("densities.csv"), densities)?;

    let h0 = histogram(&trajectory.initial().means(), bins);
    let h1 = histogram(&trajectory.last().means(), bins);
    let rows = (0..bins).map(|b| HistogramRow {
        bin_left: h0.edges[b],
        bin_right: h0.edges[b + 1],
        initial: h0.counts[b],
        final_count: h1.counts[b],
    });
    write_rows(&dir.join("mean_histogram.csv"), rows)?;

    let path = dir.join("nodes.csv");
    let mut w = csv_writer(&path)?;
    let dim = trajectory.initial().dim();
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((0..dim).map(|l| format!("a{l}")));
    header.push("mean".to_string());
    w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
    for s in ends {
        let means = s.means();
        for (i, mean) in means.iter().enumerate() {
            let mut rec = vec![s.t.to_string(), i.to_string()];
            rec.extend(s.node(i).iter().map(|v| v.to_string()));
            rec.push(mean.to_string());
            w.write_record(&rec).map_err(|e| Error::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let radius = trajectory.scenario.interaction_radius;
    let mut edges = Vec::new();
    for s in ends {
        for i in 0..s.n_agents() {
            for j in (i + 1)..s.n_agents() {
                if radius.contains(euclidean(s.node(i), s.node(j))) {
                    edges.push(EdgeRow { t: s.t, i, j });
                }
            }
        }
    }
    write_rows(&dir.join("edges.csv"), edges)
}
