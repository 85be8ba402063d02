//! Parameter grids over a base scenario.
//!
//! A sweep file names a base scenario (relative to the sweep file), a list of
//! axes and a list of seeds:
//!
//! ```json
//! {
//!   "base": "black_r5.json",
//!   "axes": [{ "parameter": "interaction_radius", "values": [3.5, 5, 10] }],
//!   "seeds": [1, 2, 3]
//! }
//! ```
//!
//! `parameter` is a dotted path into the scenario JSON (`run.dt`,
//! `diffusion_enabled`, ...). For `attitude` a string names a preset.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use dpa_core::io::load_scenario;
use dpa_core::{AttitudeParams, Scenario};

use crate::{check, execute, write_outputs, CliError, CliResult, Overrides};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PathBuf,
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Empty means the base scenario's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

/// One grid point: a value per axis, and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub values: Vec<(String, Value)>,
    pub seed: Option<u64>,
}

fn dedup<T: PartialEq + Clone>(v: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for x in v {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

impl SweepSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let spec: SweepSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (n, axis) in spec.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(CliError::Input(format!("axis {n} ({}) has no values", axis.parameter)));
            }
            if spec.axes[..n].iter().any(|a| a.parameter == axis.parameter) {
                return Err(CliError::Input(format!("parameter {} appears on two axes", axis.parameter)));
            }
        }
        Ok(spec)
    }

    /// Grid points in enumeration order: first axis outermost, seeds innermost.
    /// Repeated values on an axis, and repeated seeds, count once.
    pub fn points(&self) -> Vec<SweepPoint> {
        let seeds: Vec<Option<u64>> = if self.seeds.is_empty() {
            vec![None]
        } else {
            dedup(&self.seeds).into_iter().map(Some).collect()
        };
        let mut grid: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for axis in &self.axes {
            let values = dedup(&axis.values);
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((axis.parameter.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        grid.into_iter()
            .flat_map(|values| {
                seeds.iter().map(move |&seed| SweepPoint {
                    values: values.clone(),
                    seed,
                })
            })
            .collect()
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> CliResult<()> {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Input(format!("parameter {path}: `{}` is not an object", keys[..depth].join("."))))?;
        if depth + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// The base scenario with one grid point's values applied.
pub fn apply_point(base: &Scenario, point: &SweepPoint) -> CliResult<Scenario> {
    let mut json = serde_json::to_value(base).expect("plain data serializes");
    for (param, value) in &point.values {
        let value = match (param.as_str(), value) {
            ("attitude", Value::String(name)) => {
                let preset = AttitudeParams::preset(name)
                    .ok_or_else(|| CliError::Input(format!("unknown attitude preset `{name}`")))?;
                serde_json::to_value(preset).expect("plain data serializes")
            }
            _ => value.clone(),
        };
        set_path(&mut json, param, value)?;
    }
    let mut scenario: Scenario =
        serde_json::from_value(json).map_err(|e| CliError::Input(format!("sweep point {}: {e}", label(point))))?;
    if let Some(seed) = point.seed {
        scenario.seed = seed;
    }
    check(&scenario)?;
    Ok(scenario)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn label(point: &SweepPoint) -> String {
    let mut parts: Vec<String> = point
        .values
        .iter()
        .map(|(k, v)| format!("{k}={}", value_text(v)))
        .collect();
    if let Some(s) = point.seed {
        parts.push(format!("seed={s}"));
    }
    parts.join(",")
}

/// One summary line; metrics are absent when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run: usize,
    pub point: SweepPoint,
    pub seed: u64,
    pub polarization_index: Option<f64>,
    pub bimodality_gap: Option<f64>,
    pub n_clusters: Option<usize>,
    pub cluster_opinion_spread: Option<f64>,
    pub initial_polarization_index: Option<f64>,
    pub initial_bimodality_gap: Option<f64>,
    pub initial_cluster_opinion_spread: Option<f64>,
    pub error: Option<String>,
}

impl SummaryRow {
    pub fn value(&self, parameter: &str) -> Option<&Value> {
        self.point.values.iter().find(|(k, _)| k == parameter).map(|(_, v)| v)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_summary(path: &Path, axes: &[Axis], rows: &[SummaryRow]) -> CliResult<()> {
    let runtime = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    let mut header = vec!["run".to_string()];
    header.extend(axes.iter().map(|a| a.parameter.clone()));
    header.extend(
        [
            "seed",
            "status",
            "polarization_index",
            "bimodality_gap",
            "n_clusters",
            "cluster_opinion_spread",
            "initial_polarization_index",
            "initial_bimodality_gap",
            "initial_cluster_opinion_spread",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(runtime)?;
    for r in rows {
        let mut rec = vec![r.run.to_string()];
        rec.extend(r.point.values.iter().map(|(_, v)| value_text(v)));
        rec.push(r.seed.to_string());
        rec.push(if r.error.is_some() { "failed" } else { "ok" }.to_string());
        rec.push(opt(r.polarization_index));
        rec.push(opt(r.bimodality_gap));
        rec.push(opt(r.n_clusters));
        rec.push(opt(r.cluster_opinion_spread));
        rec.push(opt(r.initial_polarization_index));
        rec.push(opt(r.initial_bimodality_gap));
        rec.push(opt(r.initial_cluster_opinion_spread));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(runtime)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn run_point(base: &Scenario, point: &SweepPoint, run: usize, dir: Option<PathBuf>, bins: usize) -> SummaryRow {
    let mut row = SummaryRow {
        run,
        point: point.clone(),
        seed: point.seed.unwrap_or(base.seed),
        polarization_index: None,
        bimodality_gap: None,
        n_clusters: None,
        cluster_opinion_spread: None,
        initial_polarization_index: None,
        initial_bimodality_gap: None,
        initial_cluster_opinion_spread: None,
        error: None,
    };
    let result = apply_point(base, point).and_then(|s| {
        let o = execute(&s, bins)?;
        if let Some(dir) = dir {
            write_outputs(&o, &dir, bins)?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => {
            row.polarization_index = Some(o.last.polarization_index);
            row.bimodality_gap = Some(o.last.bimodality_gap);
            row.n_clusters = Some(o.last.n_clusters);
            row.cluster_opinion_spread = Some(o.last.cluster_opinion_spread);
            row.initial_polarization_index = Some(o.initial.polarization_index);
            row.initial_bimodality_gap = Some(o.initial.bimodality_gap);
            row.initial_cluster_opinion_spread = Some(o.initial.cluster_opinion_spread);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Run the sweep grid with up to `jobs` concurrent runs and write
/// `summary.csv`; failed runs are recorded, not fatal.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &Scenario,
    out_dir: &Path,
    jobs: Option<usize>,
    write_runs: bool,
    bins: usize,
) -> CliResult<Vec<SummaryRow>> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let points = spec.points();
    let work = || -> Vec<SummaryRow> {
        points
            .par_iter()
            .enumerate()
            .map(|(n, p)| {
                let dir = write_runs.then(|| out_dir.join(format!("run_{n:04}")));
                run_point(base, p, n, dir, bins)
            })
            .collect()
    };
    let rows = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work),
        None => work(),
    };
    write_summary(&out_dir.join(SUMMARY_FILE), &spec.axes, &rows)?;
    Ok(rows)
}

pub fn cmd_sweep(
    sweep_path: &Path,
    out_dir: &Path,
    jobs: Option<usize>,
    write_runs: bool,
    overrides: &Overrides,
    bins: usize,
) -> CliResult<Vec<SummaryRow>> {
    let spec = SweepSpec::load(sweep_path)?;
    let base_path = sweep_path.parent().unwrap_or(Path::new(".")).join(&spec.base);
    let mut base = load_scenario(&base_path)?;
    overrides.apply(&mut base);
    check(&base)?;
    run_sweep(&spec, &base, out_dir, jobs, write_runs, bins)
}
