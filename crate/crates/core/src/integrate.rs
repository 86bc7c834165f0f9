//! Adaptive Dormand–Prince 5(4) integration of the chart-coordinate equations,
//! with chart switching and bisection-located boundary and energy events.

use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::dynamics::{kinetic_energy, rhs_at, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{invert, Chart, Coords, LocalGeometry, Surface, Vec3, COMFORT_DEPTH};

/// Phase-space point in one chart of the atlas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub chart: usize,
    pub u: Coords,
    pub v: Coords,
}

impl State {
    pub fn new(t: f64, chart: usize, u: Coords, v: Coords) -> Self {
        Self { t, chart, u, v }
    }

    /// Embedded position `q` and velocity `p`.
    pub fn embedded(&self, surface: &Surface) -> Result<(Vec3, Vec3)> {
        let geo = LocalGeometry::at(surface.chart(self.chart), self.u)?;
        Ok((geo.point, geo.velocity(self.v)))
    }

    pub fn boundary_value(&self, surface: &Surface) -> f64 {
        surface.chart(self.chart).boundary(self.u)
    }

    pub fn kinetic_energy(&self, surface: &Surface) -> Result<f64> {
        Ok(kinetic_energy(&self.embedded(surface)?.1))
    }

    /// State from an embedded point and velocity, projected orthogonally onto
    /// the surface if within `tolerance` of it.
    pub fn from_embedded(surface: &Surface, t: f64, q: &Vec3, p: &Vec3, tolerance: f64) -> Result<Self> {
        let (chart, u) = surface
            .best_chart_within(q, None, tolerance.max(1e-9 * (1.0 + q.norm())))
            .or_else(|| surface.best_chart_within(q, None, f64::INFINITY))
            .ok_or_else(|| atlas_error(q))?;
        let (_, distance) = invert(surface.chart(chart), q, Some(u))?;
        if distance > tolerance {
            return Err(Error::Precondition(format!(
                "point is {distance:e} away from the surface (tolerance {tolerance:e})"
            )));
        }
        let geo = LocalGeometry::at(surface.chart(chart), u)?;
        let v = geo.project_velocity(p);
        let normal_part = (p - geo.velocity(v)).norm();
        if normal_part > tolerance * (1.0 + p.norm()) {
            return Err(Error::Precondition(format!(
                "velocity has normal component {normal_part:e} (tolerance {tolerance:e})"
            )));
        }
        Ok(Self::new(t, chart, u, v))
    }

    fn pack(&self) -> [f64; 4] {
        [self.u[0], self.u[1], self.v[0], self.v[1]]
    }

    fn unpack(t: f64, chart: usize, y: [f64; 4]) -> Self {
        Self::new(t, chart, [y[0], y[1]], [y[2], y[3]])
    }
}

fn atlas_error(q: &Vec3) -> Error {
    Error::Atlas {
        x: q.x,
        y: q.y,
        z: q.z,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; `None` means a 32nd of the forcing period.
    pub max_step: Option<f64>,
    pub event_time_tol: f64,
    pub switch_charts: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            max_step: None,
            event_time_tol: 1e-10,
            switch_charts: true,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..self.clone()
        }
    }
}

/// Which event functions stop the integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Events {
    /// Stop when `b` becomes negative.
    pub boundary: bool,
    /// Stop when `‖p‖²/2` exceeds this ceiling.
    pub energy_ceiling: Option<f64>,
}

impl Events {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn boundary() -> Self {
        Self {
            boundary: true,
            energy_ceiling: None,
        }
    }

    pub fn block(ceiling: f64) -> Self {
        Self {
            boundary: true,
            energy_ceiling: Some(ceiling),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    ExitedM,
    EnergyCeiling,
    LeftAtlas,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::ReachedEnd => "reached t_end",
            Termination::ExitedM => "exited M",
            Termination::EnergyCeiling => "energy ceiling",
            Termination::LeftAtlas => "left chart atlas",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub state: State,
    /// Step that produced this sample (0 for the initial one).
    pub step: f64,
    /// Error estimate in units of the tolerance, ≤ 1 for accepted steps.
    pub error: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub chart_switches: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl TrajectorySegment {
    pub fn first(&self) -> &State {
        &self.samples[0].state
    }

    pub fn last(&self) -> &State {
        &self.samples[self.samples.len() - 1].state
    }

    pub fn min_boundary(&self, surface: &Surface) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.boundary_value(surface))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_kinetic_energy(&self, surface: &Surface) -> Result<f64> {
        self.samples
            .iter()
            .try_fold(0.0f64, |m, s| Ok(m.max(s.state.kinetic_energy(surface)?)))
    }

    /// Rows `t, q, p, kinetic energy, b`, one per sample.
    pub fn rows(&self, surface: &Surface) -> Result<Vec<[f64; 9]>> {
        self.samples
            .iter()
            .map(|s| {
                let (q, p) = s.state.embedded(surface)?;
                Ok([
                    s.state.t,
                    q.x,
                    q.y,
                    q.z,
                    p.x,
                    p.y,
                    p.z,
                    kinetic_energy(&p),
                    s.state.boundary_value(surface),
                ])
            })
            .collect()
    }

    pub fn write_csv(&self, surface: &Surface, out: impl Write) -> Result<()> {
        write_trajectory_csv(&self.rows(surface)?, out)?;
        Ok(())
    }
}

pub const TRAJECTORY_HEADER: &str = "t,qx,qy,qz,px,py,pz,kinetic_energy,b";

pub fn write_trajectory_csv(rows: &[[f64; 9]], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parses a trajectory CSV written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(input: impl BufRead) -> Result<Vec<[f64; 9]>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
    if header.trim_end() != TRAJECTORY_HEADER {
        return Err(Error::Parse(format!("unexpected trajectory header `{header}`")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse(format!("line {}: expected 9 fields, got {}", n + 2, fields.len())));
        }
        let mut row = [0.0; 9];
        for (slot, f) in row.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number `{f}`", n + 2)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct RawStep {
    y: [f64; 4],
    err: [f64; 4],
    k_last: [f64; 4],
}

fn derivative(scenario: &Scenario, chart: &dyn Chart, t: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
    let u = [y[0], y[1]];
    let v = [y[2], y[3]];
    let geo = LocalGeometry::at(chart, u)?;
    let a = rhs_at(scenario, &geo, t, v)?;
    Ok([v[0], v[1], a[0], a[1]])
}

fn raw_step(
    scenario: &Scenario,
    chart: &dyn Chart,
    t: f64,
    y: &[f64; 4],
    h: f64,
    k_first: Option<[f64; 4]>,
    stats: &mut StepStats,
) -> Result<RawStep> {
    let mut k = [[0.0; 4]; 7];
    k[0] = match k_first {
        Some(k1) => k1,
        None => {
            stats.evaluations += 1;
            derivative(scenario, chart, t, y)?
        }
    };
    let mut y_new = *y;
    for s in 1..7 {
        let mut ys = *y;
        for i in 0..4 {
            ys[i] += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
        }
        stats.evaluations += 1;
        k[s] = derivative(scenario, chart, t + C[s] * h, &ys)?;
        if s == 6 {
            y_new = ys;
        }
    }
    let mut err = [0.0; 4];
    for i in 0..4 {
        err[i] = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
    }
    Ok(RawStep {
        y: y_new,
        err,
        k_last: k[6],
    })
}

/// Slots of the packed `(u, v)` vector used by a chart of dimension `dim`.
fn active(dim: usize) -> &'static [usize] {
    if dim == 1 {
        &[0, 2]
    } else {
        &[0, 1, 2, 3]
    }
}

fn scaled_error(config: &IntegratorConfig, y0: &[f64; 4], step: &RawStep, dim: usize) -> f64 {
    let slots = active(dim);
    let sum: f64 = slots
        .iter()
        .map(|&i| {
            let scale = config.atol + config.rtol * y0[i].abs().max(step.y[i].abs());
            (step.err[i] / scale).powi(2)
        })
        .sum();
    (sum / slots.len() as f64).sqrt()
}

/// One Dormand–Prince step of size `h > 0`; returns the new state and the
/// Euclidean norm of the fifth-minus-fourth-order difference.
pub fn step(scenario: &Scenario, state: &State, h: f64) -> Result<(State, f64)> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step size must be positive, got {h}")));
    }
    let chart = scenario.surface.chart(state.chart);
    let mut stats = StepStats::default();
    let raw = raw_step(scenario, chart, state.t, &state.pack(), h, None, &mut stats)?;
    let err = raw.err.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok((State::unpack(state.t + h, state.chart, raw.y), err))
}

/// Re-expresses a state in the chart where it sits deepest; the embedded `q`
/// and `p` are unchanged. Returns the state itself when that is its own chart.
pub fn switch_chart(surface: &Surface, state: &State) -> Result<State> {
    let (q, p) = state.embedded(surface)?;
    let (chart, u) = surface
        .best_chart(&q, Some((state.chart, state.u)))
        .ok_or_else(|| atlas_error(&q))?;
    if chart == state.chart {
        return Ok(*state);
    }
    let geo = LocalGeometry::at(surface.chart(chart), u)?;
    Ok(State::new(state.t, chart, u, geo.project_velocity(&p)))
}

fn initial_step(scenario: &Scenario, chart: &dyn Chart, state: &State, config: &IntegratorConfig, span: f64) -> Result<f64> {
    let slots = active(chart.dim());
    let y0 = state.pack();
    let f0 = derivative(scenario, chart, state.t, &y0)?;
    let scale: Vec<f64> = (0..4).map(|i| config.atol + config.rtol * y0[i].abs()).collect();
    let norm = |x: &[f64; 4]| {
        (slots.iter().map(|&i| (x[i] / scale[i]).powi(2)).sum::<f64>() / slots.len() as f64).sqrt()
    };
    let (d0, d1) = (norm(&y0), norm(&f0));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = y0;
    for i in 0..4 {
        y1[i] += h0 * f0[i];
    }
    let h1 = match derivative(scenario, chart, state.t + h0, &y1) {
        Ok(f1) => {
            let mut diff = [0.0; 4];
            for i in 0..4 {
                diff[i] = f1[i] - f0[i];
            }
            let d2 = norm(&diff) / h0;
            if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            }
        }
        Err(_) => h0,
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Adaptive integration from `state0` to `t_end` or the first event.
pub fn integrate(
    scenario: &Scenario,
    state0: &State,
    t_end: f64,
    events: &Events,
    config: &IntegratorConfig,
) -> Result<TrajectorySegment> {
    if t_end < state0.t {
        return Err(Error::Precondition(format!(
            "t_end = {t_end} precedes the initial time {}",
            state0.t
        )));
    }
    let surface = &scenario.surface;
    let mut stats = StepStats::default();
    let mut samples = vec![Sample {
        state: *state0,
        step: 0.0,
        error: 0.0,
    }];
    let finish = |samples: Vec<Sample>, termination, stats| TrajectorySegment {
        samples,
        termination,
        stats,
    };
    if events.boundary && state0.boundary_value(surface) < -crate::geometry::BOUNDARY_TOL {
        return Ok(finish(samples, Termination::ExitedM, stats));
    }
    let span = t_end - state0.t;
    if span == 0.0 {
        return Ok(finish(samples, Termination::ReachedEnd, stats));
    }
    let max_step = config.max_step.unwrap_or(scenario.period() / 32.0);

    let mut state = *state0;
    let mut h = initial_step(scenario, surface.chart(state.chart), &state, config, span)?.min(max_step);
    let mut k_first: Option<[f64; 4]> = None;

    loop {
        let remaining = t_end - state.t;
        if remaining <= 0.0 {
            return Ok(finish(samples, Termination::ReachedEnd, stats));
        }
        let h_min = 1e-14 * state.t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Stiffness {
                t: state.t,
                h,
                chart: state.chart,
                u0: state.u[0],
                u1: state.u[1],
            });
        }
        let last = h >= remaining;
        let h_try = if last { remaining } else { h.min(max_step) };
        let chart = surface.chart(state.chart);
        let y0 = state.pack();

        let raw = match raw_step(scenario, chart, state.t, &y0, h_try, k_first, &mut stats) {
            Ok(raw) => raw,
            Err(Error::Domain { .. } | Error::DegenerateChart { .. }) => {
                stats.rejected += 1;
                h = h_try * 0.25;
                if h < h_min {
                    return Ok(finish(samples, Termination::LeftAtlas, stats));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = scaled_error(config, &y0, &raw, chart.dim());
        if !(err <= 1.0) {
            stats.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h = h_try * factor;
            continue;
        }
        stats.accepted += 1;
        let t_new = if last { t_end } else { state.t + h_try };
        let mut new_state = State::unpack(t_new, state.chart, raw.y);

        // events: localize the earliest crossing inside this step
        let boundary_hit = events.boundary && new_state.boundary_value(surface) < 0.0;
        let energy_hit = match events.energy_ceiling {
            Some(c) => new_state.kinetic_energy(surface)? > c,
            None => false,
        };
        if boundary_hit || energy_hit {
            let mut best: Option<(State, Termination, f64)> = None;
            if boundary_hit {
                let (s, hh) = localize(scenario, &state, h_try, config, &mut stats, |s| {
                    Ok(s.boundary_value(surface) < 0.0)
                })?;
                best = Some((s, Termination::ExitedM, hh));
            }
            if let (true, Some(c)) = (energy_hit, events.energy_ceiling) {
                let (s, hh) = localize(scenario, &state, h_try, config, &mut stats, |s| {
                    Ok(s.kinetic_energy(surface)? > c)
                })?;
                if best.as_ref().is_none_or(|b| hh < b.2) {
                    best = Some((s, Termination::EnergyCeiling, hh));
                }
            }
            let (s, termination, hh) = best.expect("an event was detected");
            samples.push(Sample {
                state: s,
                step: hh,
                error: err,
            });
            return Ok(finish(samples, termination, stats));
        }

        samples.push(Sample {
            state: new_state,
            step: h_try,
            error: err,
        });
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if !last {
            h = h_try * grow;
        }
        k_first = Some(raw.k_last);

        if config.switch_charts && surface.chart(new_state.chart).depth(new_state.u) < COMFORT_DEPTH {
            match switch_chart(surface, &new_state) {
                Ok(switched) => {
                    if switched.chart != new_state.chart {
                        stats.chart_switches += 1;
                        new_state = switched;
                        k_first = None;
                        let last = samples.len() - 1;
                        samples[last].state = new_state;
                    }
                }
                Err(Error::Atlas { .. }) => return Ok(finish(samples, Termination::LeftAtlas, stats)),
                Err(e) => return Err(e),
            }
        }
        state = new_state;
    }
}

/// Bisects the step length until the first state satisfying `hit` is known to
/// within the event time tolerance.
fn localize(
    scenario: &Scenario,
    start: &State,
    h: f64,
    config: &IntegratorConfig,
    stats: &mut StepStats,
    hit: impl Fn(&State) -> Result<bool>,
) -> Result<(State, f64)> {
    let chart = scenario.surface.chart(start.chart);
    let y0 = start.pack();
    let mut lo = 0.0;
    let mut hi = h;
    let mut hi_state = None;
    while hi - lo > config.event_time_tol {
        let mid = 0.5 * (lo + hi);
        let raw = raw_step(scenario, chart, start.t, &y0, mid, None, stats)?;
        let s = State::unpack(start.t + mid, start.chart, raw.y);
        if hit(&s)? {
            hi = mid;
            hi_state = Some(s);
        } else {
            lo = mid;
        }
    }
    let state = match hi_state {
        Some(s) => s,
        None => {
            let raw = raw_step(scenario, chart, start.t, &y0, hi, None, stats)?;
            State::unpack(start.t + hi, start.chart, raw.y)
        }
    };
    Ok((state, hi))
}
