//! Command implementations behind the `forced-surface` binary.
//!
//! Every command returns a [`CommandOutcome`]; files are written through a
//! temporary file in the target directory and renamed into place, so a failed
//! command never leaves a partial artifact behind.

use std::fmt::Write as _;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use forced_surface::geometry::{exit_index, Mesh};
use forced_surface::hypotheses::check_all;
use forced_surface::integrate::{
    integrate, read_trajectory_csv, Events, IntegratorConfig, State,
};
use forced_surface::orbit::{find_orbit, OrbitOptions};
use forced_surface::scenarios::resolve;
use forced_surface::{Error, Scenario, Vec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Off-surface initial states closer than this are projected onto the surface.
pub const PROJECTION_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "forced-surface", version, about = "Forced massive point with friction on a compact surface with boundary")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the four existence conditions and print the report.
    Check(CheckArgs),
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Search, verify and export a T-periodic orbit.
    FindOrbit(FindOrbitArgs),
    /// Euler characteristic and exit index of a mesh.
    EulerChar(EulerCharArgs),
    /// Derive plot series (energy, boundary distance, path) from a trajectory.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    /// Built-in scenario name or path to a TOML scenario file.
    #[arg(long, value_name = "NAME|PATH")]
    pub scenario: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Directory for the machine-readable report `hypotheses.json`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Initial state: embedded position, velocity and start time.
    #[arg(long, num_args = 7, value_names = ["QX", "QY", "QZ", "PX", "PY", "PZ", "T0"], allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// End time in seconds; defaults to one forcing period after the start.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory for `trajectory.csv`.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FindOrbitArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Shooting integration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of quasi-random seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Search even when the hypotheses fail.
    #[arg(long)]
    pub force: bool,
    /// Output directory for `orbit.json`, `orbit_trajectory.csv` and `hypotheses.json`.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EulerCharArgs {
    /// Mesh file (`v x y z`, `f i j k`, `l i j` records).
    #[arg(required_unless_present = "scenario", conflicts_with = "scenario")]
    pub mesh: Option<PathBuf>,
    /// Use the mesh of a scenario instead.
    #[arg(long, value_name = "NAME|PATH")]
    pub scenario: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    /// Trajectory CSV, or an orbit report whose `trajectory_csv` is used.
    pub input: PathBuf,
    /// Output directory for `energy.csv`, `boundary.csv` and `path.csv`.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn new(code: i32, summary: impl Into<String>) -> Self {
        Self {
            code,
            summary: summary.into(),
            artifacts: Vec::new(),
        }
    }
}

/// Exit code for a library error.
fn code_of(error: &Error) -> i32 {
    match error {
        Error::Stiffness { .. } | Error::NoOrbit { .. } | Error::Atlas { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn failure(error: Error) -> CommandOutcome {
    CommandOutcome::new(code_of(&error), format!("error: {error}"))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

/// Stages several files and renames them only once all were written.
fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        staged.push((dir.join(name), tmp));
    }
    let mut written = Vec::new();
    for (path, tmp) in staged {
        tmp.persist(&path).map_err(|e| e.error)?;
        written.push(path);
    }
    Ok(written)
}

fn load(source: &str) -> Result<Scenario, CommandOutcome> {
    resolve(source).map_err(|e| CommandOutcome::new(EXIT_USAGE, format!("error: cannot load scenario `{source}`: {e}")))
}

pub fn run(cli: Cli) -> CommandOutcome {
    match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::FindOrbit(args) => cmd_find_orbit(&args),
        Command::EulerChar(args) => cmd_euler_char(&args),
        Command::PlotData(args) => cmd_plot_data(&args),
    }
}

/// Parses `args` (including the program name) and runs the command; clap
/// usage errors map to exit code 2, help and version output to 0.
pub fn run_from<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            CommandOutcome::new(code, e.render().to_string())
        }
    }
}

pub fn cmd_check(args: &CheckArgs) -> CommandOutcome {
    let scenario = match load(&args.scenario.scenario) {
        Ok(s) => s,
        Err(outcome) => return outcome,
    };
    let report = check_all(&scenario);
    let mut outcome = CommandOutcome::new(
        if report.verdict { EXIT_OK } else { EXIT_FAILED_CHECK },
        report.to_text(),
    );
    if let Some(dir) = &args.out {
        match write_atomic(dir, "hypotheses.json", report.to_json().as_bytes()) {
            Ok(path) => outcome.artifacts.push(path),
            Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {e}")),
        }
    }
    outcome
}

fn initial_state(scenario: &Scenario, state: Option<&[f64]>) -> Result<State, CommandOutcome> {
    let Some(s) = state else {
        return Ok(State::new(0.0, 0, [0.0, 0.0], [0.0, 0.0]));
    };
    let q = Vec3::new(s[0], s[1], s[2]);
    let p = Vec3::new(s[3], s[4], s[5]);
    State::from_embedded(&scenario.surface, s[6], &q, &p, PROJECTION_TOL)
        .map_err(|e| CommandOutcome::new(EXIT_USAGE, format!("error: invalid initial state: {e}")))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CommandOutcome {
    let scenario = match load(&args.scenario.scenario) {
        Ok(s) => s,
        Err(outcome) => return outcome,
    };
    let state0 = match initial_state(&scenario, args.state.as_deref()) {
        Ok(s) => s,
        Err(outcome) => return outcome,
    };
    let t_end = args.t_end.unwrap_or(state0.t + scenario.period());
    let config = match args.tol {
        Some(tol) => IntegratorConfig::with_tolerance(tol),
        None => IntegratorConfig {
            rtol: scenario.config.solver.rtol,
            atol: scenario.config.solver.atol,
            ..IntegratorConfig::default()
        },
    };
    let segment = match integrate(&scenario, &state0, t_end, &Events::boundary(), &config) {
        Ok(s) => s,
        Err(e) => return failure(e),
    };
    let mut csv = Vec::new();
    if let Err(e) = segment.write_csv(&scenario.surface, &mut csv) {
        return failure(e);
    }
    let mut outcome = CommandOutcome::new(
        EXIT_OK,
        format!(
            "termination: {} at t = {} ({} accepted, {} rejected steps)",
            segment.termination,
            segment.last().t,
            segment.stats.accepted,
            segment.stats.rejected
        ),
    );
    match write_atomic(&args.out, "trajectory.csv", &csv) {
        Ok(path) => outcome.artifacts.push(path),
        Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {e}")),
    }
    outcome
}

pub fn cmd_find_orbit(args: &FindOrbitArgs) -> CommandOutcome {
    let scenario = match load(&args.scenario.scenario) {
        Ok(s) => s,
        Err(outcome) => return outcome,
    };
    let report = check_all(&scenario);
    let mut summary = report.to_text();
    if !report.verdict && !args.force {
        summary.push_str("hypotheses fail; no search performed (use --force to search anyway)\n");
        return CommandOutcome::new(EXIT_FAILED_CHECK, summary);
    }
    let mut options = OrbitOptions::from_scenario(&scenario);
    options.force = args.force;
    if let Some(tol) = args.tol {
        options.tolerance = tol;
    }
    if let Some(seeds) = args.seeds {
        options.seeds = seeds;
    }
    let search = match find_orbit(&scenario, &report, &options) {
        Ok(s) => s,
        Err(e) => {
            let mut outcome = failure(e);
            outcome.summary = format!("{summary}{}", outcome.summary);
            return outcome;
        }
    };
    let best = search.best().expect("a successful search has a verified orbit");
    let mut csv = Vec::new();
    if let Err(e) = best.trajectory.write_csv(&scenario.surface, &mut csv) {
        return failure(e);
    }
    let trajectory_name = "orbit_trajectory.csv";
    let files = [
        ("hypotheses.json", report.to_json().into_bytes()),
        (trajectory_name, csv),
        ("orbit.json", search.to_json(Some(trajectory_name)).into_bytes()),
    ];
    let artifacts = match write_all(&args.out, &files) {
        Ok(paths) => paths,
        Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {e}")),
    };
    let (q, p) = best
        .state
        .embedded(&scenario.surface)
        .unwrap_or((Vec3::zeros(), Vec3::zeros()));
    let _ = writeln!(
        summary,
        "orbit: q0 = ({:.9}, {:.9}, {:.9}), p0 = ({:.9}, {:.9}, {:.9})",
        q.x, q.y, q.z, p.x, p.y, p.z
    );
    let _ = writeln!(
        summary,
        "residual {:.3e}, clearance min b = {:.6e}, energy margin {:.6e} J, {} distinct orbit(s), {} of {} seeds converged",
        best.residual,
        best.clearance,
        best.energy_margin,
        search.orbits.len(),
        search.seeds.iter().filter(|s| s.converged).count(),
        search.seeds.len()
    );
    CommandOutcome {
        code: EXIT_OK,
        summary,
        artifacts,
    }
}

pub fn cmd_euler_char(args: &EulerCharArgs) -> CommandOutcome {
    let mesh = match (&args.mesh, &args.scenario) {
        (Some(path), _) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {}: {e}", path.display())),
            };
            match Mesh::parse(&text) {
                Ok(m) => m,
                Err(e) => return failure(e),
            }
        }
        (None, Some(source)) => match load(source) {
            Ok(s) => match s.surface.mesh {
                Some(m) => m,
                None => return CommandOutcome::new(EXIT_USAGE, "error: scenario has no mesh"),
            },
            Err(outcome) => return outcome,
        },
        (None, None) => return CommandOutcome::new(EXIT_USAGE, "error: give a mesh file or --scenario"),
    };
    let counts = match mesh.counts() {
        Ok(c) => c,
        Err(e) => return failure(e),
    };
    let mut summary = format!(
        "V = {}, E = {}, F = {}\nchi = {}\nboundary components = {}\n",
        counts.vertices, counts.edges, counts.faces, counts.euler_characteristic, counts.boundary_components
    );
    if let Ok(index) = exit_index(&mesh, counts.boundary_components) {
        let _ = writeln!(summary, "exit index = {index}");
    }
    CommandOutcome::new(EXIT_OK, summary)
}

fn trajectory_path(input: &Path) -> Result<PathBuf, CommandOutcome> {
    if input.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(input)
            .map_err(|e| CommandOutcome::new(EXIT_USAGE, format!("error: {}: {e}", input.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CommandOutcome::new(EXIT_USAGE, format!("error: {}: {e}", input.display())))?;
        let name = value
            .get("trajectory_csv")
            .and_then(|v| v.as_str())
            .ok_or_else(|| CommandOutcome::new(EXIT_USAGE, "error: orbit report has no trajectory_csv"))?;
        Ok(input.parent().unwrap_or(Path::new(".")).join(name))
    } else {
        Ok(input.to_path_buf())
    }
}

fn series(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut out = format!("{header}\n");
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn cmd_plot_data(args: &PlotDataArgs) -> CommandOutcome {
    let path = match trajectory_path(&args.input) {
        Ok(p) => p,
        Err(outcome) => return outcome,
    };
    let file = match std::fs::File::open(&path) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {}: {e}", path.display())),
    };
    let rows = match read_trajectory_csv(BufReader::new(file)) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::new(EXIT_USAGE, format!("error: {}: {e}", path.display())),
    };
    if rows.is_empty() {
        return CommandOutcome::new(EXIT_USAGE, format!("error: {} holds no trajectory rows", path.display()));
    }
    let files = [
        ("energy.csv", series("t,kinetic_energy", rows.iter().map(|r| vec![r[0], r[7]]))),
        ("boundary.csv", series("t,b", rows.iter().map(|r| vec![r[0], r[8]]))),
        ("path.csv", series("t,qx,qy,qz", rows.iter().map(|r| vec![r[0], r[1], r[2], r[3]]))),
    ];
    match write_all(&args.out, &files) {
        Ok(artifacts) => CommandOutcome {
            code: EXIT_OK,
            summary: format!("{} rows from {}", rows.len(), path.display()),
            artifacts,
        },
        Err(e) => CommandOutcome::new(EXIT_USAGE, format!("error: {e}")),
    }
}
