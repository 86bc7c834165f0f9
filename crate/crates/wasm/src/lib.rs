//! Browser bindings: simulate a trajectory, search a periodic orbit and map
//! the outward push along the boundary. Everything crosses the boundary as
//! numbers, flat `f64` arrays or JSON text.

use wasm_bindgen::prelude::*;

use forced_surface::geometry::boundary_tangent;
use forced_surface::hypotheses::tangency_margin;
use forced_surface::integrate::{Events, TRAJECTORY_HEADER};
use forced_surface::scenarios::{builtin, BuiltinParams, ScenarioConfig};
use forced_surface::{check_all, find_orbit, integrate, IntegratorConfig, OrbitOptions, Scenario, State};

/// Columns per trajectory row, as in [`TRAJECTORY_HEADER`].
pub const ROW_WIDTH: usize = 9;

const FLAT_DISK: &str = include_str!("../../../scenarios/flat_disk.toml");

/// Built-in scenario (or the flat-disk counterexample) with forcing amplitude and friction.
pub fn make_scenario(name: &str, amplitude: f64, gamma: f64) -> Result<Scenario, String> {
    if name == "flat_disk" {
        let mut config = ScenarioConfig::from_toml(FLAT_DISK).map_err(|e| e.to_string())?;
        config.friction.gamma = gamma;
        config.friction.gamma_min = None;
        return Scenario::from_config(config, None).map_err(|e| e.to_string());
    }
    let params = BuiltinParams {
        amplitude: Some(amplitude),
        gamma: Some(gamma),
        ..Default::default()
    };
    builtin(name, &params).map_err(|e| e.to_string())
}

/// Trajectory rows from home-chart coordinates `(u, v)` at `t = 0`, flattened row by row.
pub fn simulate_rows(
    name: &str,
    amplitude: f64,
    gamma: f64,
    start: [f64; 4],
    t_end: f64,
) -> Result<Vec<f64>, String> {
    let s = make_scenario(name, amplitude, gamma)?;
    let state = State::new(0.0, 0, [start[0], start[1]], [start[2], start[3]]);
    let seg = integrate(&s, &state, t_end, &Events::boundary(), &IntegratorConfig::default())
        .map_err(|e| e.to_string())?;
    let rows = seg.rows(&s.surface).map_err(|e| e.to_string())?;
    Ok(rows.into_iter().flatten().collect())
}

/// Orbit search report as JSON, with the best orbit's trajectory rows under `rows`.
pub fn orbit_json(name: &str, amplitude: f64, gamma: f64, seeds: usize) -> Result<String, String> {
    let s = make_scenario(name, amplitude, gamma)?;
    let report = check_all(&s);
    let mut options = OrbitOptions::from_scenario(&s);
    options.seeds = seeds.max(1);
    options.force = true;
    let search = find_orbit(&s, &report, &options).map_err(|e| e.to_string())?;
    let rows = match search.orbits.first() {
        Some(orbit) => orbit.trajectory.rows(&s.surface).map_err(|e| e.to_string())?,
        None => Vec::new(),
    };
    let mut value: serde_json::Value = serde_json::from_str(&search.to_json(None)).map_err(|e| e.to_string())?;
    value["hypotheses_verdict"] = serde_json::Value::Bool(report.verdict);
    value["columns"] = serde_json::Value::String(TRAJECTORY_HEADER.to_string());
    value["rows"] = serde_json::to_value(rows).map_err(|e| e.to_string())?;
    Ok(value.to_string())
}

/// `(x, y, margin, outward push)` for `points` boundary points at time `t`
/// and tangential speed `speed`, flattened.
pub fn margin_samples(
    name: &str,
    amplitude: f64,
    gamma: f64,
    t: f64,
    speed: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let s = make_scenario(name, amplitude, gamma)?;
    let chart = s.surface.home();
    let mut out = Vec::with_capacity(4 * points);
    for k in 0..points {
        let Some(u) = chart.boundary_point(k as f64 / points as f64) else {
            continue;
        };
        let tangent = boundary_tangent(chart, u).map_err(|e| e.to_string())?;
        let v = [speed * tangent[0], speed * tangent[1]];
        let (mu, push) = tangency_margin(&s, chart, t, u, v).map_err(|e| e.to_string())?;
        let q = chart.position(u);
        out.extend_from_slice(&[q.x, q.y, mu, push]);
    }
    Ok(out)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    name: &str,
    amplitude: f64,
    gamma: f64,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    t_end: f64,
) -> Result<Vec<f64>, JsError> {
    simulate_rows(name, amplitude, gamma, [u0, u1, v0, v1], t_end).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn search_orbit(name: &str, amplitude: f64, gamma: f64, seeds: usize) -> Result<String, JsError> {
    orbit_json(name, amplitude, gamma, seeds).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn boundary_margins(
    name: &str,
    amplitude: f64,
    gamma: f64,
    t: f64,
    speed: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    margin_samples(name, amplitude, gamma, t, speed, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn row_width() -> usize {
    ROW_WIDTH
}
