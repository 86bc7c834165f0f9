//! T-periodic orbits as fixed points of the time-T map, found by damped
//! Newton shooting from quasi-random seeds inside the block.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{invert, Coords, LocalGeometry};
use crate::hypotheses::{BlockSpec, HypothesisReport};
use crate::integrate::{integrate, Events, IntegratorConfig, State, Termination, TrajectorySegment};
use crate::sampling::{halton, map_indices};

/// Maximum halvings of a Newton step.
const MAX_HALVINGS: usize = 8;
const MAX_AVERAGING: usize = 400;
/// Seeds converging within this distance (max-norm, chart units) are the same orbit.
pub const DISTINCT_ORBIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PoincareResult {
    pub initial: State,
    pub final_state: State,
    /// `x(T) − x(0)` in the chart of the initial state; NaN unless the map is defined.
    pub defect: Vec<f64>,
    pub min_boundary: f64,
    pub max_kinetic_energy: f64,
    pub termination: Termination,
    pub trajectory: TrajectorySegment,
}

impl PoincareResult {
    pub fn is_defined(&self) -> bool {
        self.termination == Termination::ReachedEnd
    }

    pub fn residual(&self) -> f64 {
        self.defect.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

fn coordinates(state: &State, n: usize) -> Vec<f64> {
    let y = [state.u[0], state.u[1], state.v[0], state.v[1]];
    match n {
        2 => vec![y[0], y[2]],
        _ => y.to_vec(),
    }
}

fn from_coordinates(t: f64, chart: usize, x: &[f64]) -> State {
    match x.len() {
        2 => State::new(t, chart, [x[0], 0.0], [x[1], 0.0]),
        _ => State::new(t, chart, [x[0], x[1]], [x[2], x[3]]),
    }
}

/// `state` re-expressed in `chart`, if that chart covers it.
fn in_chart(scenario: &Scenario, state: &State, chart: usize, guess: Coords) -> Option<State> {
    if state.chart == chart {
        return Some(*state);
    }
    let surface = &scenario.surface;
    let (q, p) = state.embedded(surface).ok()?;
    let target = surface.chart(chart);
    let (u, distance) = invert(target, &q, Some(guess)).ok()?;
    if distance > 1e-9 * (1.0 + q.norm()) || target.depth(u) <= 0.0 {
        return None;
    }
    let geo = LocalGeometry::at(target, u).ok()?;
    Some(State::new(state.t, chart, u, geo.project_velocity(&p)))
}

/// Integrates one period from `state0`, stopping at the boundary or at `ceiling`.
pub fn poincare_map(
    scenario: &Scenario,
    state0: &State,
    ceiling: Option<f64>,
    config: &IntegratorConfig,
) -> Result<PoincareResult> {
    let events = Events {
        boundary: true,
        energy_ceiling: ceiling.filter(|c| c.is_finite()),
    };
    let trajectory = integrate(scenario, state0, state0.t + scenario.period(), &events, config)?;
    let surface = &scenario.surface;
    let min_boundary = trajectory.min_boundary(surface);
    let max_kinetic_energy = trajectory.max_kinetic_energy(surface)?;
    let mut termination = trajectory.termination;
    let end = *trajectory.last();
    let n = 2 * surface.dim();
    let mut defect = vec![f64::NAN; n];
    let mut final_state = end;
    if termination == Termination::ReachedEnd {
        match in_chart(scenario, &end, state0.chart, state0.u) {
            Some(s) => {
                final_state = s;
                let a = coordinates(&s, n);
                let b = coordinates(state0, n);
                defect = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            }
            None => termination = Termination::LeftAtlas,
        }
    }
    Ok(PoincareResult {
        initial: *state0,
        final_state,
        defect,
        min_boundary,
        max_kinetic_energy,
        termination,
        trajectory,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitOptions {
    pub seeds: usize,
    /// Search even when the hypotheses fail.
    pub force: bool,
    /// Integration tolerance of the shooting map.
    pub tolerance: f64,
    pub newton_tol: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub clearance_tol: f64,
    /// Explicit seeds in the home chart; replaces the quasi-random set.
    #[serde(skip)]
    pub seed_states: Option<Vec<State>>,
}

impl OrbitOptions {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let s = &scenario.config.solver;
        Self {
            seeds: s.seeds,
            force: false,
            tolerance: s.shooting_tol,
            newton_tol: s.newton_tol,
            max_iterations: s.newton_max_iterations,
            fd_step: s.fd_step,
            clearance_tol: s.clearance_tol,
            seed_states: None,
        }
    }

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::with_tolerance(self.tolerance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub residual: f64,
    /// Step length factor accepted, 0.5 for averaging steps.
    pub damping: f64,
    pub averaging: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub tolerance: f64,
    pub residual: f64,
    pub clearance: f64,
    pub max_kinetic_energy: f64,
    pub ceiling: f64,
    /// Largest difference between the stored trajectory and a fresh run at the same tolerance.
    pub reproduction_error: f64,
    /// End-state difference between the stored trajectory and the tight run.
    pub tight_deviation: f64,
    pub samples_checked: usize,
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    #[serde(serialize_with = "serialize_state")]
    pub state: State,
    pub residual: f64,
    /// `min b` over the stored trajectory.
    pub clearance: f64,
    pub max_kinetic_energy: f64,
    /// `c − max ‖p‖²/2`.
    pub energy_margin: f64,
    pub seed_index: usize,
    /// Seeds that converged to this orbit.
    pub seed_count: usize,
    pub newton_log: Vec<NewtonStep>,
    pub verification: Option<Verification>,
    #[serde(skip)]
    pub trajectory: TrajectorySegment,
}

fn serialize_state<S: serde::Serializer>(state: &State, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("State", 4)?;
    st.serialize_field("t", &state.t)?;
    st.serialize_field("chart", &state.chart)?;
    st.serialize_field("u", &state.u)?;
    st.serialize_field("v", &state.v)?;
    st.end()
}

impl PeriodicOrbit {
    pub fn verified(&self) -> bool {
        self.verification.as_ref().is_some_and(|v| v.pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedReport {
    pub index: usize,
    pub initial: Vec<f64>,
    pub outcome: String,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitSearch {
    pub scenario: String,
    pub hypotheses_pass: bool,
    pub ceiling: f64,
    pub options: OrbitOptions,
    /// Distinct orbits, verified ones first, then by residual.
    pub orbits: Vec<PeriodicOrbit>,
    pub seeds: Vec<SeedReport>,
}

impl OrbitSearch {
    pub fn best(&self) -> Option<&PeriodicOrbit> {
        self.orbits.first().filter(|o| o.verified())
    }

    pub fn to_json(&self, trajectory_csv: Option<&str>) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            #[serde(flatten)]
            search: &'a OrbitSearch,
            trajectory_csv: Option<&'a str>,
        }
        serde_json::to_string_pretty(&Report {
            search: self,
            trajectory_csv,
        })
        .expect("orbit reports always serialize")
    }
}

/// Quasi-random interior seeds with `‖p‖²/2 ≤ c/2`; seed 0 is the chart centre at rest.
pub fn default_seeds(scenario: &Scenario, ceiling: f64, n: usize) -> Vec<State> {
    let chart = scenario.surface.home();
    let max_speed = if ceiling.is_finite() { ceiling.sqrt() } else { 1.0 };
    (0..n)
        .filter_map(|i| {
            let u = chart.interior_point([halton(i, 0), halton(i, 1)]);
            let geo = LocalGeometry::at(chart, u).ok()?;
            let speed = max_speed * halton(i, 3).powi(3);
            let angle = TAU * halton(i, 2);
            let e1 = geo.partials[0].normalize();
            let p = if chart.dim() == 1 {
                e1 * speed * if angle.cos() < 0.0 { -1.0 } else { 1.0 }
            } else {
                let e2 = chart.normal(u).cross(&e1).normalize();
                (e1 * angle.cos() + e2 * angle.sin()) * speed
            };
            Some(State::new(0.0, 0, u, geo.project_velocity(&p)))
        })
        .collect()
}

struct Shooter<'a> {
    scenario: &'a Scenario,
    ceiling: f64,
    config: IntegratorConfig,
    chart: usize,
    t0: f64,
}

impl Shooter<'_> {
    fn map(&self, x: &[f64]) -> Option<PoincareResult> {
        let state = from_coordinates(self.t0, self.chart, x);
        let result = poincare_map(self.scenario, &state, Some(self.ceiling), &self.config).ok()?;
        result.is_defined().then_some(result)
    }
}

struct SeedRun {
    report: SeedReport,
    fixed_point: Option<(Vec<f64>, PoincareResult, Vec<NewtonStep>)>,
}

fn shoot(shooter: &Shooter, index: usize, seed: &State, options: &OrbitOptions) -> SeedRun {
    let n = 2 * shooter.scenario.surface.dim();
    let mut x = coordinates(seed, n);
    let initial = x.clone();
    let mut log = Vec::new();
    let fail = |outcome: String, residual: f64, iterations: usize| SeedRun {
        report: SeedReport {
            index,
            initial: initial.clone(),
            outcome,
            converged: false,
            residual,
            iterations,
        },
        fixed_point: None,
    };

    let Some(mut current) = shooter.map(&x) else {
        return fail("seed leaves the block within one period".into(), f64::NAN, 0);
    };
    let mut residual = current.residual();
    let mut iterations = 0;
    let mut stalled = false;

    while residual >= options.newton_tol && iterations < options.max_iterations {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut ok = true;
        for j in 0..n {
            let mut xj = x.clone();
            xj[j] += options.fd_step;
            match shooter.map(&xj) {
                Some(r) => {
                    for i in 0..n {
                        jac[(i, j)] = (r.defect[i] - current.defect[i]) / options.fd_step;
                    }
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        let step = if ok {
            jac.lu().solve(&-DVector::from_column_slice(&current.defect))
        } else {
            None
        };
        let Some(step) = step else {
            stalled = true;
            break;
        };
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + damping * d).collect();
            if let Some(r) = shooter.map(&trial) {
                if r.residual() < residual {
                    x = trial;
                    residual = r.residual();
                    current = r;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
        log.push(NewtonStep {
            iteration: iterations,
            residual,
            damping,
            averaging: false,
        });
    }

    if stalled && residual >= options.newton_tol {
        // averaged fixed-point iteration x ← (x + P(x)) / 2
        for _ in 0..MAX_AVERAGING {
            let trial: Vec<f64> = x.iter().zip(&current.defect).map(|(a, d)| a + 0.5 * d).collect();
            let Some(r) = shooter.map(&trial) else {
                break;
            };
            if !(r.residual() < residual) {
                break;
            }
            iterations += 1;
            x = trial;
            residual = r.residual();
            current = r;
            log.push(NewtonStep {
                iteration: iterations,
                residual,
                damping: 0.5,
                averaging: true,
            });
            if residual < options.newton_tol {
                break;
            }
        }
    }

    if !(residual < options.newton_tol) {
        let why = if stalled { "Newton stalled and averaging did not converge" } else { "iteration limit reached" };
        return fail(format!("{why} (residual {residual:e})"), residual, iterations);
    }
    if !(current.min_boundary > options.clearance_tol) {
        return fail(
            format!("rejected: orbit grazes the boundary (min b = {:e})", current.min_boundary),
            residual,
            iterations,
        );
    }
    if !(current.max_kinetic_energy < shooter.ceiling) {
        return fail("rejected: orbit reaches the energy ceiling".into(), residual, iterations);
    }
    SeedRun {
        report: SeedReport {
            index,
            initial,
            outcome: "converged".into(),
            converged: true,
            residual,
            iterations,
        },
        fixed_point: Some((x, current, log)),
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Multistart shooting; every distinct converged orbit is verified and reported.
pub fn find_orbit(scenario: &Scenario, report: &HypothesisReport, options: &OrbitOptions) -> Result<OrbitSearch> {
    if !report.verdict && !options.force {
        return Err(Error::Precondition(
            "hypotheses fail; the search needs an explicit override".into(),
        ));
    }
    let ceiling = report.ceiling.unwrap_or(f64::INFINITY);
    let seeds = match &options.seed_states {
        Some(s) => s.clone(),
        None => default_seeds(scenario, ceiling, options.seeds),
    };
    let shooter = Shooter {
        scenario,
        ceiling,
        config: options.integrator(),
        chart: 0,
        t0: 0.0,
    };
    let runs = map_indices(seeds.len(), |i| {
        let seed = seeds[i];
        let s = Shooter {
            chart: seed.chart,
            t0: seed.t,
            ..shooter_ref(&shooter)
        };
        shoot(&s, i, &seed, options)
    });

    let mut reports = Vec::with_capacity(runs.len());
    let mut converged = Vec::new();
    for run in runs {
        reports.push(run.report.clone());
        if let Some(fp) = run.fixed_point {
            converged.push((run.report.index, run.report.residual, fp));
        }
    }
    converged.sort_by(|a, b| a.1.total_cmp(&b.1).then(lexicographic(&a.2 .0, &b.2 .0)));

    let mut orbits: Vec<(Vec<f64>, PeriodicOrbit)> = Vec::new();
    for (index, residual, (x, result, log)) in converged {
        if let Some((_, orbit)) = orbits.iter_mut().find(|(y, o)| {
            o.state.chart == result.initial.chart
                && x.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() < DISTINCT_ORBIT_TOL)
        }) {
            orbit.seed_count += 1;
            continue;
        }
        orbits.push((
            x,
            PeriodicOrbit {
                state: result.initial,
                residual,
                clearance: result.min_boundary,
                max_kinetic_energy: result.max_kinetic_energy,
                energy_margin: ceiling - result.max_kinetic_energy,
                seed_index: index,
                seed_count: 1,
                newton_log: log,
                verification: None,
                trajectory: result.trajectory,
            },
        ));
    }
    let mut orbits: Vec<PeriodicOrbit> = orbits.into_iter().map(|(_, o)| o).collect();
    for orbit in &mut orbits {
        orbit.verification = Some(verify_orbit(scenario, orbit, ceiling, options.tolerance)?);
    }
    // stable: verified orbits first, residual order otherwise kept
    orbits.sort_by_key(|o| !o.verified());

    let search = OrbitSearch {
        scenario: scenario.name.clone(),
        hypotheses_pass: report.verdict,
        ceiling,
        options: options.clone(),
        orbits,
        seeds: reports,
    };
    if search.best().is_none() {
        let converged = search.seeds.iter().filter(|s| s.converged).count();
        let mut detail = format!("{converged} seed(s) converged, none verified");
        for orbit in &search.orbits {
            if let Some(v) = &orbit.verification {
                detail.push_str(&format!("; orbit from seed {}: {}", orbit.seed_index, v.failures.join(", ")));
            }
        }
        for s in search.seeds.iter().take(8) {
            detail.push_str(&format!("; seed {}: {}", s.index, s.outcome));
        }
        return Err(Error::NoOrbit {
            seeds: search.seeds.len(),
            verdict: if report.verdict { "pass" } else { "fail" },
            detail,
        });
    }
    Ok(search)
}

fn shooter_ref<'a>(s: &Shooter<'a>) -> Shooter<'a> {
    Shooter {
        scenario: s.scenario,
        ceiling: s.ceiling,
        config: s.config.clone(),
        chart: s.chart,
        t0: s.t0,
    }
}

/// Re-integrates `orbit` at a hundredth of `tolerance` and checks periodicity,
/// clearance, energy containment and that no point of it is an exit point.
pub fn verify_orbit(scenario: &Scenario, orbit: &PeriodicOrbit, ceiling: f64, tolerance: f64) -> Result<Verification> {
    let tight = IntegratorConfig::with_tolerance(tolerance * 0.01);
    let surface = &scenario.surface;
    let mut failures = Vec::new();
    let result = poincare_map(scenario, &orbit.state, Some(ceiling), &tight)?;
    if !result.is_defined() {
        failures.push(format!(
            "re-integration stopped: {} at t = {}",
            result.termination,
            result.trajectory.last().t
        ));
    }
    let residual = result.residual();
    if !(residual < 1e-6) {
        failures.push(format!("periodicity residual {residual:e} at t = {}", result.final_state.t));
    }
    let mut clearance = f64::INFINITY;
    let mut max_energy: f64 = 0.0;
    let block = BlockSpec::new(scenario, if ceiling.is_finite() { ceiling } else { f64::MAX }).ok();
    let mut first_exit: Option<f64> = None;
    for sample in &result.trajectory.samples {
        let s = sample.state;
        let b = s.boundary_value(surface);
        let energy = s.kinetic_energy(surface)?;
        if b < clearance {
            clearance = b;
            if !(b > 0.0) && first_exit.is_none() {
                first_exit = Some(s.t);
            }
        }
        if energy > max_energy {
            max_energy = energy;
            if !(energy < ceiling) && first_exit.is_none() {
                first_exit = Some(s.t);
            }
        }
        if let Some(block) = &block {
            match block.classify_state(&s) {
                Ok(c) if c.is_essential_exit() => {
                    first_exit.get_or_insert(s.t);
                }
                Err(_) => {
                    first_exit.get_or_insert(s.t);
                }
                _ => {}
            }
        }
    }
    if !(clearance > 0.0) {
        failures.push(format!("minimum b = {clearance:e} is not positive"));
    }
    if !(max_energy < ceiling) {
        failures.push(format!("kinetic energy {max_energy} reaches the ceiling {ceiling}"));
    }
    if let Some(t) = first_exit {
        failures.push(format!("trajectory touches the exit set at t = {t}"));
    }
    let n = 2 * surface.dim();
    let distance = |a: &State, b: &State| {
        if a.chart != b.chart {
            return f64::INFINITY;
        }
        coordinates(a, n)
            .iter()
            .zip(coordinates(b, n))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let tight_deviation = distance(orbit.trajectory.last(), result.trajectory.last());

    let again = integrate(
        scenario,
        &orbit.state,
        orbit.state.t + scenario.period(),
        &Events::none(),
        &IntegratorConfig::with_tolerance(tolerance),
    )?;
    let reproduction_error = if again.samples.len() == orbit.trajectory.samples.len() {
        again
            .samples
            .iter()
            .zip(&orbit.trajectory.samples)
            .map(|(a, b)| distance(&a.state, &b.state))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    if !(reproduction_error <= 10.0 * tolerance) {
        failures.push(format!(
            "re-integration differs from the stored trajectory by {reproduction_error:e} (t = {})",
            again.last().t
        ));
    }
    Ok(Verification {
        tolerance: tight.rtol,
        residual,
        clearance,
        max_kinetic_energy: max_energy,
        ceiling,
        reproduction_error,
        tight_deviation,
        samples_checked: result.trajectory.samples.len(),
        pass: failures.is_empty(),
        failures,
    })
}
