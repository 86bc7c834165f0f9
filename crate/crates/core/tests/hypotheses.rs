use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::PathBuf;

use forced_surface::geometry::LocalGeometry;
use forced_surface::hypotheses::{
    check_energy_shell, check_force_bound, check_friction_bound, check_topology, tangency_margin,
};
use forced_surface::scenarios::{builtin, load, BuiltinParams, ScenarioConfig};
use forced_surface::{
    check_all, classify_exit, energy_ceiling, BlockSpec, Error, ExitClass, Scenario, State, Vec3,
};
use proptest::prelude::*;

fn example(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load(&path).unwrap()
}

fn from_toml(text: &str) -> Scenario {
    Scenario::from_config(ScenarioConfig::from_toml(text).unwrap(), None).unwrap()
}

fn hemisphere() -> Scenario {
    builtin("hemisphere_pendulum", &BuiltinParams::default()).unwrap()
}

#[test]
fn ceiling_matches_closed_form() {
    for &(d, g, f) in &[(0.0, 0.1, 9.8227), (2.0, 0.5, 0.3), (1.0, 2.0, 4.0)] {
        let expected = 0.5 * (1.1 * f64::max(d, f / g)).powi(2);
        let c = energy_ceiling(d, g, f, 1.1).unwrap();
        assert!((c - expected).abs() <= 1e-12 * expected);
    }
}

#[test]
fn builtin_ceiling_value() {
    let s = hemisphere();
    let report = check_all(&s);
    let c = report.ceiling.unwrap();
    // F_max = √(9.81² + 0.5²)
    let f = (9.81f64 * 9.81 + 0.25).sqrt();
    assert!((c - 0.5 * (1.1 * f / 0.1).powi(2)).abs() < 1e-9);
    assert!((c - 5837.409).abs() < 1e-3);
}

#[test]
fn non_positive_friction_has_no_ceiling() {
    assert!(matches!(energy_ceiling(0.0, 0.0, 1.0, 1.1), Err(Error::NonPositiveFriction(_))));
    assert!(matches!(energy_ceiling(0.0, -0.1, 1.0, 1.1), Err(Error::NonPositiveFriction(_))));
    assert!(matches!(energy_ceiling(0.0, 0.1, f64::INFINITY, 1.1), Err(Error::UnboundedForce)));
}

#[test]
fn builtins_pass_every_condition() {
    for name in ["half_circle_pendulum", "hemisphere_pendulum", "figure1_surface"] {
        let report = check_all(&builtin(name, &BuiltinParams::default()).unwrap());
        assert!(report.verdict, "{name}: {:?}", report.failures);
        assert!(report.tangency.min_margin > 1e-6);
        assert!(report.tangency.behavioral_disagreements.is_empty());
    }
}

#[test]
fn hemisphere_topology() {
    let t = check_topology(&hemisphere());
    assert_eq!(t.euler_characteristic, Some(1));
    assert_eq!(t.exit_index, Some(1));
    assert!(t.pass);
}

#[test]
fn half_circle_topology() {
    let t = check_topology(&builtin("half_circle_pendulum", &BuiltinParams::default()).unwrap());
    assert_eq!(t.euler_characteristic, Some(1));
    assert!(t.pass);
}

#[test]
fn modulated_friction_minimum_is_found() {
    let s = example("modulated_friction.toml");
    let check = check_friction_bound(&s, &s.config.sampling, 10.0);
    assert!((check.sampled_min - 0.05).abs() < 1e-12, "{}", check.sampled_min);
    assert!(check.pass);
}

#[test]
fn overstated_friction_bound_is_caught() {
    let s = from_toml(
        r#"
name = "overstated"
period = 1.0
[surface]
kind = "hemisphere"
length = 1.0
[friction]
gamma = 0.1
harmonics = [{ order = 1, sin = 0.05 }]
gamma_min = 0.08
"#,
    );
    let check = check_friction_bound(&s, &s.config.sampling, 10.0);
    assert!(!check.pass);
    assert!(check.violation_count > 0);
    assert!(check.violations.iter().all(|v| v.value < 0.08));
}

#[test]
fn frictionless_scenario_fails() {
    let s = from_toml(
        r#"
name = "frictionless"
period = 1.0
[surface]
kind = "hemisphere"
length = 1.0
[friction]
gamma = 0.0
"#,
    );
    let report = check_all(&s);
    assert!(!report.verdict);
    assert!(report.ceiling.is_none());
    assert!(report.failures.iter().any(|f| f.contains("gamma_min")));
}

#[test]
fn understated_force_bound_is_caught() {
    let s = from_toml(
        r#"
name = "understated"
period = 1.0
[surface]
kind = "hemisphere"
length = 1.0
[forcing]
force_bound = 9.0
[friction]
gamma = 0.1
"#,
    );
    let check = check_force_bound(&s, &s.config.sampling, 10.0);
    assert!(!check.pass);
    assert!((check.sampled_max - 9.81).abs() < 1e-12);
}

#[test]
fn velocity_coupling_is_unbounded() {
    let s = from_toml(
        r#"
name = "coupled"
period = 1.0
[surface]
kind = "hemisphere"
length = 1.0
[forcing]
velocity_coupling = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
[friction]
gamma = 0.1
"#,
    );
    let report = check_all(&s);
    assert!(!report.force.pass);
    assert!(report.force.velocity_coupling);
    assert!(!report.verdict);
}

#[test]
fn flat_disk_fails_external_tangency() {
    let s = example("flat_disk.toml");
    let report = check_all(&s);
    assert!(report.topology.pass);
    assert!(!report.tangency.pass);
    assert!(!report.verdict);
    assert!(report.tangency.max_abs_outward_push < 1e-12);
    assert!(report.tangency.violations.iter().all(|v| v.margin.abs() < 1e-12));
    assert!(report.tangency.behavioral_disagreements.is_empty());
}

#[test]
fn flat_disk_margin_is_centripetal() {
    // straight-line motion tangent to a circle of radius R leaves it with b̈ = −|v|²/R
    let s = example("flat_disk.toml");
    let chart = s.surface.home();
    for speed in [0.0, 0.5, 2.0] {
        let (mu, push) = tangency_margin(&s, chart, 0.3, [0.0, 1.0], [speed, 0.0]).unwrap();
        assert!((mu - speed * speed).abs() < 1e-12, "{mu}");
        assert!(push.abs() < 1e-15);
    }
}

#[test]
fn annulus_fails_topology() {
    let report = check_all(&example("flat_annulus.toml"));
    assert_eq!(report.topology.euler_characteristic, Some(0));
    assert!(!report.topology.pass);
    assert!(!report.verdict);
}

#[test]
fn annulus_mesh_overrides_the_generated_one() {
    let s = example("hemisphere_annulus_mesh.toml");
    let t = check_topology(&s);
    assert_eq!(t.euler_characteristic, Some(0));
    assert!(!t.pass);
}

#[test]
fn hemisphere_margin_at_rest_is_gravity() {
    let s = hemisphere();
    let chart = s.surface.home();
    for t in [0.0, 0.25, 0.6] {
        let (mu, push) = tangency_margin(&s, chart, t, [0.0, FRAC_PI_2], [0.0, 0.0]).unwrap();
        assert!((mu - 9.81).abs() < 1e-9);
        assert!((push - 9.81).abs() < 1e-9);
    }
}

#[test]
fn hemisphere_rim_motion_adds_no_centripetal_term() {
    // along the rim the equator is a great circle: b̈ keeps only gravity
    let s = hemisphere();
    let chart = s.surface.home();
    let (mu, _) = tangency_margin(&s, chart, 0.0, [0.0, FRAC_PI_2], [-3.0 / FRAC_PI_2, 0.0]).unwrap();
    assert!((mu - 9.81).abs() < 1e-6, "{mu}");
}

#[test]
fn shell_check_passes_on_hemisphere() {
    let s = hemisphere();
    let c = check_all(&s).ceiling.unwrap();
    let shell = check_energy_shell(&s, c, 2000);
    assert!(shell.pass);
    assert!(shell.max_rate < 0.0);
}

#[test]
fn shell_check_fails_below_the_ceiling() {
    // at F_max/γ speeds the forcing can still feed energy in
    let s = hemisphere();
    let shell = check_energy_shell(&s, 0.5 * 0.5f64.powi(2), 2000);
    assert!(!shell.pass);
}

#[test]
fn classifier_on_the_rim() {
    let s = hemisphere();
    let block = BlockSpec::for_scenario(&s).unwrap();
    let q = Vec3::new(1.0, 0.0, 0.0);
    let classify = |p: Vec3| classify_exit(&block, 0.0, &q, &p).unwrap();
    assert_eq!(classify(Vec3::new(0.0, 0.0, -1.0)), ExitClass::EssentialExit);
    assert_eq!(classify(Vec3::new(0.0, 0.0, 1.0)), ExitClass::Entry);
    assert_eq!(classify(Vec3::new(0.0, 1.0, 0.0)), ExitClass::Tangent);
    assert!(ExitClass::Tangent.is_essential_exit());
    assert!(!ExitClass::Entry.is_essential_exit());
    let inside = Vec3::new(0.0, 0.0, 1.0);
    assert_eq!(classify_exit(&block, 0.0, &inside, &Vec3::new(1.0, 0.0, 0.0)).unwrap(), ExitClass::Interior);
}

#[test]
fn classifier_rejects_states_outside_the_block() {
    let s = hemisphere();
    let block = BlockSpec::new(&s, 1.0).unwrap();
    let q = Vec3::new(1.0, 0.0, 0.0);
    assert!(matches!(
        classify_exit(&block, 0.0, &q, &Vec3::new(0.0, 0.0, -2.0)),
        Err(Error::Precondition(_))
    ));
    let below = Vec3::new(0.5f64.sqrt(), 0.0, -(0.5f64.sqrt()));
    assert!(classify_exit(&block, 0.0, &below, &Vec3::zeros()).is_err());
    assert!(classify_exit(&block, 0.0, &Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros()).is_err());
    assert!(BlockSpec::new(&s, 0.0).is_err());
}

#[test]
fn reports_serialize() {
    let report = check_all(&builtin("half_circle_pendulum", &BuiltinParams::default()).unwrap());
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["verdict"], serde_json::Value::Bool(true));
    let text = report.to_text();
    assert!(text.contains("[PASS] condition 4"));
    assert!(text.contains("verdict: PASS"));
}

proptest! {
    #[test]
    fn ceiling_is_monotone(
        d in 0.0..50.0f64,
        g in 0.01..5.0f64,
        f in 0.0..50.0f64,
        dg in 0.0..1.0f64,
        df in 0.0..10.0f64,
        dd in 0.0..10.0f64,
    ) {
        let c = energy_ceiling(d, g, f, 1.1).unwrap();
        prop_assert!(energy_ceiling(d, g + dg, f, 1.1).unwrap() <= c);
        prop_assert!(energy_ceiling(d, g, f + df, 1.1).unwrap() >= c);
        prop_assert!(energy_ceiling(d + dd, g, f, 1.1).unwrap() >= c);
    }

    #[test]
    fn shell_rate_is_negative_on_any_tangent_direction(
        sigma in 0.0..1.57f64,
        phi in 0.0..TAU,
        angle in 0.0..TAU,
        t in 0.0..1.0f64,
    ) {
        let s = hemisphere();
        let c = energy_ceiling(0.0, 0.1, s.force_bound(), 1.1).unwrap();
        let chart = s.surface.home();
        let u = [sigma * phi.cos(), sigma * phi.sin()];
        let geo = LocalGeometry::at(chart, u).unwrap();
        let (e0, e1) = (geo.partials[0].normalize(), geo.partials[1]);
        let e1 = (e1 - e0 * e1.dot(&e0)).normalize();
        let p = (e0 * angle.cos() + e1 * angle.sin()) * (2.0 * c).sqrt();
        prop_assert!(forced_surface::kinetic_energy_rate(&s, t, &geo.point, &p) < 0.0);
    }

    #[test]
    fn interior_states_are_interior(sigma in 0.0..1.5f64, v0 in -5.0..5.0f64) {
        let s = hemisphere();
        let block = BlockSpec::for_scenario(&s).unwrap();
        let class = block.classify_state(&State::new(0.0, 0, [sigma, 0.0], [v0, 0.0])).unwrap();
        prop_assert_eq!(class, ExitClass::Interior);
    }
}
