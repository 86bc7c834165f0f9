use std::f64::consts::TAU;

use forced_surface::integrate::Events;
use forced_surface::scenarios::{builtin, BuiltinParams};
use forced_surface::{
    check_all, find_orbit, integrate, poincare_map, verify_orbit, Error, IntegratorConfig, OrbitOptions, Scenario,
    State, Termination,
};

fn scenario(name: &str) -> Scenario {
    builtin(name, &BuiltinParams::default()).unwrap()
}

/// Periodic solution of θ̈ + γθ̇ − (g/ℓ)θ = −(A/ℓ) sin ωt at t = 0: (θ, θ̇).
fn linear_orbit(a: f64, gamma: f64, g: f64, l: f64, period: f64) -> (f64, f64) {
    let w = TAU / period;
    let k = w * w + g / l;
    let c = gamma * w;
    // θ = X sin ωt + Y cos ωt
    let x = a / l * k / (k * k + c * c);
    let y = a / l * c / (k * k + c * c);
    (y, w * x)
}

fn assert_matches_linear(s: &Scenario, u0: f64, v0: f64) {
    let (theta, omega) = linear_orbit(0.5, 0.1, 9.81, 1.0, 1.0);
    assert!((u0 - theta).abs() < 1e-3 * theta.abs(), "{} vs {theta} on {}", u0, s.name);
    assert!((v0 - omega).abs() < 1e-3 * omega.abs(), "{} vs {omega} on {}", v0, s.name);
}

#[test]
fn linear_oracle_values() {
    let (theta, omega) = linear_orbit(0.5, 0.1, 9.81, 1.0, 1.0);
    assert!((theta - 1.293e-4).abs() < 5e-8);
    assert!((omega - 0.06373).abs() < 5e-6);
}

#[test]
fn half_circle_orbit_matches_linearisation() {
    let s = scenario("half_circle_pendulum");
    let report = check_all(&s);
    let search = find_orbit(&s, &report, &OrbitOptions::from_scenario(&s)).unwrap();
    let orbit = search.best().expect("a verified orbit");
    assert!(orbit.residual < 1e-8);
    assert!(orbit.clearance > 0.0);
    assert_eq!(orbit.state.chart, 0);
    assert_matches_linear(&s, orbit.state.u[0], orbit.state.v[0]);
}

#[test]
fn hemisphere_orbit_is_planar_and_matches_linearisation() {
    let s = scenario("hemisphere_pendulum");
    let report = check_all(&s);
    let search = find_orbit(&s, &report, &OrbitOptions::from_scenario(&s)).unwrap();
    let orbit = search.best().expect("a verified orbit");
    assert!(orbit.residual < 1e-8);
    assert!(orbit.energy_margin > 0.0);
    assert!(orbit.state.u[1].abs() < 1e-8 && orbit.state.v[1].abs() < 1e-8);
    assert_matches_linear(&s, orbit.state.u[0], orbit.state.v[0]);
}

#[test]
fn unforced_apex_is_a_fixed_point() {
    let s = builtin(
        "hemisphere_pendulum",
        &BuiltinParams {
            amplitude: Some(0.0),
            ..Default::default()
        },
    )
    .unwrap();
    let result = poincare_map(
        &s,
        &State::new(0.0, 0, [0.0, 0.0], [0.0, 0.0]),
        None,
        &IntegratorConfig::with_tolerance(1e-11),
    )
    .unwrap();
    assert!(result.is_defined());
    assert!(result.residual() < 1e-10);
}

#[test]
fn perturbed_orbit_fails_verification() {
    let s = scenario("half_circle_pendulum");
    let report = check_all(&s);
    let search = find_orbit(&s, &report, &OrbitOptions::from_scenario(&s)).unwrap();
    let c = search.ceiling;
    let mut orbit = search.best().unwrap().clone();
    orbit.state.u[0] += 1e-3;
    let tol = s.config.solver.shooting_tol;
    let v = verify_orbit(&s, &orbit, c, tol).unwrap();
    assert!(!v.pass);
    assert!(v.residual > 1e-6);
}

#[test]
fn search_is_deterministic() {
    let s = scenario("figure1_surface");
    let report = check_all(&s);
    let options = OrbitOptions::from_scenario(&s);
    let a = find_orbit(&s, &report, &options).unwrap();
    let b = find_orbit(&s, &report, &options).unwrap();
    assert_eq!(a.to_json(None), b.to_json(None));
    assert!(a.best().is_some());
}

#[test]
fn failed_hypotheses_block_the_search() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/flat_annulus.toml");
    let s = forced_surface::scenarios::load(&path).unwrap();
    let report = check_all(&s);
    assert!(!report.verdict);
    let err = find_orbit(&s, &report, &OrbitOptions::from_scenario(&s)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn map_stops_at_the_boundary() {
    let s = scenario("hemisphere_pendulum");
    let result = poincare_map(
        &s,
        &State::new(0.0, 0, [1.5, 0.0], [1.0, 0.0]),
        None,
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert_eq!(result.termination, Termination::ExitedM);
    assert!(!result.is_defined());
    assert!(result.defect.iter().all(|d| d.is_nan()));
}

#[test]
fn two_periods_compose() {
    let s = scenario("hemisphere_pendulum");
    let tol = 1e-10;
    let cfg = IntegratorConfig::with_tolerance(tol);
    let (theta, omega) = linear_orbit(0.5, 0.1, 9.81, 1.0, 1.0);
    let start = State::new(0.0, 0, [theta + 1e-6, -1e-6], [omega, 2e-6]);
    let once = poincare_map(&s, &start, None, &cfg).unwrap();
    let twice = poincare_map(&s, &once.final_state, None, &cfg).unwrap();
    assert!(once.is_defined() && twice.is_defined());
    let direct = integrate(&s, &start, 2.0, &Events::none(), &cfg).unwrap();
    let end = direct.last();
    for i in 0..2 {
        assert!((twice.final_state.u[i] - end.u[i]).abs() < 5.0 * tol);
        assert!((twice.final_state.v[i] - end.v[i]).abs() < 5.0 * tol);
    }
}
