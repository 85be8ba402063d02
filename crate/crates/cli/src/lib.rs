//! Command implementations behind the `dpa` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dpa_core::io::{self, DEFAULT_BINS};
use dpa_core::metrics::MetricsRecord;
use dpa_core::{simulate, validate, InteractionRadius, Scenario, Trajectory};

pub mod converge;
pub mod sweep;

pub use converge::{cmd_converge, ConvergenceRow, ConvergenceSummary};
pub use sweep::{cmd_sweep, Axis, SweepPoint, SweepSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad scenario, sweep file or arguments; exit status 2.
    Input(String),
    /// Failure while running or writing results; exit status 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dpa_core::Error> for CliError {
    fn from(e: dpa_core::Error) -> Self {
        if e.is_invalid_input() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "dpa", version, about = "Particle simulations of opinion densities on a moving network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write snapshots, metrics, plot data and a manifest.
    Run {
        scenario: PathBuf,
        /// Output directory (same as --out).
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every point of a sweep grid and write a summary CSV.
    Sweep {
        sweep: PathBuf,
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
        /// Concurrent runs; defaults to the number of cores.
        #[arg(long, short = 'j')]
        jobs: Option<usize>,
        /// Write only the summary, not per-run snapshot directories.
        #[arg(long)]
        summary_only: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare final states across particle counts from identical initial densities.
    Converge {
        scenario: PathBuf,
        out_dir: Option<PathBuf>,
        /// Ascending particle counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        levels: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a scenario file and list violations.
    Validate { scenario: PathBuf },
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram bins for mean-opinion readouts.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

impl OutputArgs {
    fn dir(&self, positional: Option<PathBuf>) -> CliResult<PathBuf> {
        match (positional, &self.out) {
            (Some(a), Some(b)) if a != *b => Err(CliError::Input(format!(
                "output directory given twice: {} and {}",
                a.display(),
                b.display()
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b.clone()),
            (None, None) => Ok(PathBuf::from("out")),
        }
    }
}

/// Command-line replacements for scenario fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interaction radius, a positive number or `infinite`.
    #[arg(long, value_parser = parse_radius)]
    pub radius: Option<InteractionRadius>,
    #[arg(long)]
    pub no_diffusion: bool,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time; the snapshot interval is capped at it.
    #[arg(long)]
    pub t_final: Option<f64>,
}

pub fn parse_radius(s: &str) -> Result<InteractionRadius, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinite" => Ok(InteractionRadius::Infinite),
        other => match other.parse::<f64>() {
            Ok(r) if r > 0.0 && r.is_finite() => Ok(InteractionRadius::Finite(r)),
            Ok(r) if r.is_infinite() && r > 0.0 => Ok(InteractionRadius::Infinite),
            _ => Err(format!("expected a positive radius or `infinite`, got `{s}`")),
        },
    }
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(r) = self.radius {
            scenario.interaction_radius = r;
        }
        if self.no_diffusion {
            scenario.diffusion_enabled = false;
        }
        if let Some(n) = self.particles {
            scenario.run.n_particles = n;
        }
        if let Some(dt) = self.dt {
            scenario.run.dt = dt;
        }
        if let Some(t) = self.t_final {
            scenario.run.t_final = t;
            if t > 0.0 && scenario.run.snapshot_every > t {
                scenario.run.snapshot_every = t;
            }
        }
    }
}

/// Load, override and re-validate.
pub fn prepare_scenario(path: &Path, overrides: &Overrides) -> CliResult<Scenario> {
    let mut scenario = io::load_scenario(path)?;
    overrides.apply(&mut scenario);
    check(&scenario)?;
    Ok(scenario)
}

pub(crate) fn check(scenario: &Scenario) -> CliResult<()> {
    let violations = validate(scenario);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(dpa_core::Error::InvalidScenario(violations).into())
    }
}

/// A finished run with its final readouts.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub initial: MetricsRecord,
    pub last: MetricsRecord,
    pub wall_clock_seconds: f64,
}

pub fn execute(scenario: &Scenario, bins: usize) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let trajectory = simulate(scenario)?;
    let wall_clock_seconds = start.elapsed().as_secs_f64();
    let radius = trajectory.scenario.interaction_radius;
    let initial = MetricsRecord::compute(trajectory.initial(), trajectory.initial(), radius, bins)?;
    let last = MetricsRecord::compute(trajectory.last(), trajectory.initial(), radius, bins)?;
    Ok(RunOutcome {
        trajectory,
        initial,
        last,
        wall_clock_seconds,
    })
}

/// Snapshots, `metrics.csv` and `manifest.json` in `dir`, plot data in `dir/plot`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path, bins: usize) -> CliResult<io::RunManifest> {
    let manifest = io::write_snapshots(&outcome.trajectory, dir, bins, outcome.wall_clock_seconds)?;
    io::write_plot_data(&outcome.trajectory, dir.join("plot"), bins)?;
    Ok(manifest)
}

pub fn cmd_run(scenario_path: &Path, out_dir: &Path, overrides: &Overrides, bins: usize) -> CliResult<RunOutcome> {
    let scenario = prepare_scenario(scenario_path, overrides)?;
    let outcome = execute(&scenario, bins)?;
    write_outputs(&outcome, out_dir, bins)?;
    Ok(outcome)
}

pub fn cmd_validate(scenario_path: &Path) -> CliResult<Scenario> {
    Ok(io::load_scenario(scenario_path)?)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            output,
            overrides,
        } => {
            let dir = output.dir(out_dir)?;
            let o = cmd_run(&scenario, &dir, &overrides, output.bins)?;
            let s = &o.trajectory.stats;
            println!(
                "t = {}  polarization {:.4}  bimodality gap {:.4}  clusters {}  ({} steps, {} rejections, {:.2} s) -> {}",
                o.last.t,
                o.last.polarization_index,
                o.last.bimodality_gap,
                o.last.n_clusters,
                s.steps,
                s.rejections,
                o.wall_clock_seconds,
                dir.display()
            );
        }
        Command::Sweep {
            sweep,
            out_dir,
            output,
            jobs,
            summary_only,
            overrides,
        } => {
            let dir = output.dir(out_dir)?;
            let rows = cmd_sweep(&sweep, &dir, jobs, !summary_only, &overrides, output.bins)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} runs, {} failed -> {}", rows.len(), failed, dir.join(sweep::SUMMARY_FILE).display());
            if failed > 0 {
                return Err(CliError::Runtime(format!("{failed} of {} runs failed", rows.len())));
            }
        }
        Command::Converge {
            scenario,
            out_dir,
            levels,
            output,
            overrides,
        } => {
            let dir = output.dir(out_dir)?;
            let summary = cmd_converge(&scenario, &levels, &dir, &overrides)?;
            for s in &summary {
                println!(
                    "N = {} vs {}: max W1 {:.3e}  max node discrepancy {:.3e}",
                    s.n_coarse, s.n_fine, s.max_w1, s.max_node_discrepancy
                );
            }
        }
        Command::Validate { scenario } => {
            let s = cmd_validate(&scenario)?;
            println!("{}: valid ({} agents)", scenario.display(), s.n_agents());
        }
    }
    Ok(())
}

/// Parse `args` and run; the returned code follows 0 success, 1 runtime
/// failure, 2 invalid input.
pub fn run_cli<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_parsing() {
        assert_eq!(parse_radius("5"), Ok(InteractionRadius::Finite(5.0)));
        assert_eq!(parse_radius("infinite"), Ok(InteractionRadius::Infinite));
        assert!(parse_radius("0").is_err());
        assert!(parse_radius("-2").is_err());
        assert!(parse_radius("abc").is_err());
    }

    #[test]
    fn overrides_replace_fields() {
        let mut s = Scenario::sampled(dpa_core::AttitudeParams::BLACK, InteractionRadius::Finite(5.0), 1);
        Overrides {
            seed: Some(9),
            radius: Some(InteractionRadius::Finite(10.0)),
            no_diffusion: true,
            particles: Some(30),
            dt: Some(0.01),
            t_final: Some(0.5),
        }
        .apply(&mut s);
        assert_eq!(s.seed, 9);
        assert_eq!(s.interaction_radius, InteractionRadius::Finite(10.0));
        assert!(!s.diffusion_enabled);
        assert_eq!((s.run.n_particles, s.run.dt, s.run.t_final), (30, 0.01, 0.5));
    }

    #[test]
    fn output_dir_resolution() {
        let o = OutputArgs {
            out: Some("a".into()),
            bins: 10,
        };
        assert_eq!(o.dir(None).unwrap(), PathBuf::from("a"));
        assert!(o.dir(Some("b".into())).is_err());
        assert_eq!(OutputArgs::default().dir(Some("c".into())).unwrap(), PathBuf::from("c"));
    }
}
