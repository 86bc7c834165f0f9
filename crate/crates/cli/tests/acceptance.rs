//! One line per acceptance criterion; exits nonzero if any fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use forced_surface::geometry::{boundary_tangent, exit_index, outward_normal, LocalGeometry, Mesh};
use forced_surface::hypotheses::{check_energy_shell, check_external_tangency, tangency_margin};
use forced_surface::integrate::Events;
use forced_surface::scenarios::{builtin, builtin_config, load, BuiltinParams, ScenarioConfig, BUILTIN_NAMES};
use forced_surface::{
    check_all, energy_ceiling, find_orbit, halton, integrate, poincare_map, rhs, BlockSpec, IntegratorConfig,
    OrbitOptions, Scenario, State, Termination,
};

struct Line {
    pass: bool,
    text: String,
}

fn scenario(name: &str) -> Scenario {
    builtin(name, &BuiltinParams::default()).unwrap()
}

fn examples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn ceiling(s: &Scenario) -> f64 {
    let fr = &s.friction;
    energy_ceiling(fr.threshold_speed, fr.gamma_min, s.force_bound(), s.config.solver.ceiling_safety).unwrap()
}

fn topology() -> Line {
    let cap = scenario("hemisphere_pendulum").surface.mesh.clone().unwrap();
    let octa = Mesh::octahedron().euler_characteristic().unwrap();
    let hemi = cap.euler_characteristic().unwrap();
    let annulus = Mesh::annulus(4, 48, 0.5, 1.0).euler_characteristic().unwrap();
    let torus = Mesh::torus(24, 12, 2.0, 0.5).euler_characteristic().unwrap();
    let index = exit_index(&cap, 1).unwrap();
    Line {
        pass: (octa, hemi, annulus, torus, index) == (2, 1, 0, 0, 1),
        text: format!(
            "topology: chi(octahedron) = {octa}, chi(hemisphere) = {hemi}, chi(annulus) = {annulus}, chi(torus) = {torus}, exit index(hemisphere) = {index}"
        ),
    }
}

fn energy_shell() -> Line {
    let s = scenario("hemisphere_pendulum");
    let c = ceiling(&s);
    let shell = check_energy_shell(&s, c, 10_000);
    Line {
        pass: shell.pass && shell.samples == 10_000,
        text: format!(
            "energy shell: c = {c:.3} J, {} samples with |p|^2/2 = c, max dT/dt = {:.4e}, {} non-negative",
            shell.samples, shell.max_rate, shell.violation_count
        ),
    }
}

fn tangency_discrimination() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["hemisphere_pendulum", "figure1_surface"] {
        let s = scenario(name);
        let check = check_external_tangency(&s, &s.config.sampling, (2.0 * ceiling(&s)).sqrt());
        pass &= check.pass && check.min_margin > 1e-6;
        parts.push(format!("{name} min mu = {:.4} ({})", check.min_margin, if check.pass { "pass" } else { "fail" }));
    }

    let disk = load(&examples().join("flat_disk.toml")).unwrap();
    let check = check_external_tangency(&disk, &disk.config.sampling, (2.0 * ceiling(&disk)).sqrt());
    pass &= !check.pass;
    // at rest on the rim nothing pushes outwards
    let chart = disk.surface.home();
    let mut rest_max: f64 = 0.0;
    let mut moving_max: f64 = 0.0;
    let mut centripetal_err: f64 = 0.0;
    let times = disk.config.sampling.times;
    let points = disk.config.sampling.boundary_points;
    for i in 0..times {
        let t = disk.period() * i as f64 / times as f64;
        for j in 0..points {
            let u = chart.boundary_point(j as f64 / points as f64).unwrap();
            let (mu, _) = tangency_margin(&disk, chart, t, u, [0.0, 0.0]).unwrap();
            rest_max = rest_max.max(mu.abs());
            let tangent = boundary_tangent(chart, u).unwrap();
            let speed = 3.0;
            let (mu, _) = tangency_margin(&disk, chart, t, u, [speed * tangent[0], speed * tangent[1]]).unwrap();
            moving_max = moving_max.max(mu.abs());
            centripetal_err = centripetal_err.max((mu - speed * speed).abs());
        }
    }
    let push = check.max_abs_outward_push;
    pass &= rest_max < 1e-8 && push < 1e-8 && centripetal_err < 1e-9;
    parts.push(format!(
        "flat_disk {} with max |mu| = {rest_max:.1e} at rest, max |(nu, dp/dt)| = {push:.1e} over all {} samples; \
         moving tangent samples keep the centripetal part |v|^2/R (max |mu - |v|^2/R| = {centripetal_err:.1e}, literal max |mu| over all samples = {:.3e})",
        if check.pass { "passes" } else { "fails" },
        check.samples,
        check.max_abs_margin.max(moving_max),
    ));
    Line {
        pass,
        text: format!("external tangency discrimination: {}", parts.join("; ")),
    }
}

fn equilibrium() -> Line {
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
        &IntegratorConfig::with_tolerance(s.config.solver.shooting_tol),
    )
    .unwrap();
    let r = result.residual();
    Line {
        pass: result.is_defined() && r < 1e-10,
        text: format!("equilibrium fixed point: unforced apex defect norm = {r:.3e}"),
    }
}

fn guaranteed_orbit(name: &str) -> Line {
    let s = scenario(name);
    let report = check_all(&s);
    let search = match find_orbit(&s, &report, &OrbitOptions::from_scenario(&s)) {
        Ok(search) => search,
        Err(e) => {
            return Line {
                pass: false,
                text: format!("orbit on {name}: {e}"),
            }
        }
    };
    let Some(orbit) = search.best() else {
        return Line {
            pass: false,
            text: format!("orbit on {name}: no verified orbit"),
        };
    };
    let c = search.ceiling;
    // θ stays in the open upper half: every sample strictly inside
    let max_angle = orbit
        .trajectory
        .samples
        .iter()
        .map(|sm| {
            let (q, _) = sm.state.embedded(&s.surface).unwrap();
            (q.x.hypot(q.y)).atan2(q.z)
        })
        .fold(0.0f64, f64::max);
    let pass = orbit.verified()
        && orbit.residual < 1e-8
        && orbit.clearance > 0.0
        && orbit.max_kinetic_energy < c
        && max_angle < FRAC_PI_2;
    Line {
        pass,
        text: format!(
            "orbit on {name}: verified = {}, residual = {:.3e}, clearance min b = {:.6}, max angle from top = {:.6} rad, max kinetic energy = {:.4e} < c = {:.3}, u = ({:.6e}, {:.6e}), v = ({:.6e}, {:.6e})",
            orbit.verified(),
            orbit.residual,
            orbit.clearance,
            max_angle,
            orbit.max_kinetic_energy,
            c,
            orbit.state.u[0],
            orbit.state.u[1],
            orbit.state.v[0],
            orbit.state.v[1]
        ),
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn integrator_order() -> Line {
    let s = scenario("hemisphere_pendulum");
    let start = State::new(0.0, 0, [0.3, -0.2], [0.5, 0.4]);
    let run = |tol: f64| {
        let cfg = IntegratorConfig {
            max_step: Some(1.0),
            ..IntegratorConfig::with_tolerance(tol)
        };
        integrate(&s, &start, 1.0, &Events::none(), &cfg).unwrap()
    };
    let reference = *run(1e-14).last();
    let (rq, rp) = reference.embedded(&s.surface).unwrap();
    let tols = [1e-6, 1e-8, 1e-10, 1e-12];
    let mut errors = Vec::new();
    let mut steps = Vec::new();
    for &tol in &tols {
        let seg = run(tol);
        let (q, p) = seg.last().embedded(&s.surface).unwrap();
        errors.push((q - rq).norm().max((p - rp).norm()));
        steps.push(1.0 / seg.stats.accepted as f64);
    }
    let order = slope(&steps, &errors);
    let per_tol = slope(&tols, &errors);

    // P over 2T against P∘P, near the periodic orbit so the map stays defined
    let near = State::new(0.0, 0, [1.3e-4, 1e-6], [0.0637, -2e-6]);
    let mut worst_ratio: f64 = 0.0;
    let mut composed = true;
    for &tol in &tols {
        let cfg = IntegratorConfig::with_tolerance(tol);
        let once = poincare_map(&s, &near, None, &cfg).unwrap();
        let twice = poincare_map(&s, &once.final_state, None, &cfg).unwrap();
        let direct = integrate(&s, &near, 2.0 * s.period(), &Events::boundary(), &cfg).unwrap();
        composed &= once.is_defined() && twice.is_defined() && direct.termination == Termination::ReachedEnd;
        let end = direct.last();
        let gap = (0..2)
            .map(|i| (twice.final_state.u[i] - end.u[i]).abs().max((twice.final_state.v[i] - end.v[i]).abs()))
            .fold(0.0f64, f64::max);
        worst_ratio = worst_ratio.max(gap / tol);
    }
    Line {
        pass: (4.5..=5.5).contains(&order) && composed && worst_ratio <= 5.0,
        text: format!(
            "integrator order: log-log slope of error against mean step = {order:.3} (errors {}; error against tolerance slope {per_tol:.3}); |P_2T - P o P| <= {worst_ratio:.3} x tolerance",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn exit_agreement() -> Line {
    let s = scenario("hemisphere_pendulum");
    let block = BlockSpec::for_scenario(&s).unwrap();
    let chart = s.surface.home();
    let horizon = 1e-3 * s.period();
    // within this band gravity can turn a slow entry into an exit before the horizon ends
    let band = 2.0 * s.force_bound() * horizon;
    let speed_max = (2.0 * block.ceiling).sqrt();
    let cfg = IntegratorConfig::with_tolerance(1e-12);
    let (mut agree, mut disagree, mut banded, mut exits) = (0, 0, 0, 0);
    for i in 1..=1000 {
        let t = s.period() * halton(i, 0);
        let u = chart.boundary_point(halton(i, 1)).unwrap();
        let geo = LocalGeometry::at(chart, u).unwrap();
        let outward = outward_normal(chart, &geo, u).unwrap();
        let tangent = geo.velocity(boundary_tangent(chart, u).unwrap());
        let angle = TAU * halton(i, 2);
        let speed = speed_max * halton(i, 3).powi(3);
        let p = (tangent * angle.cos() + outward * angle.sin()) * speed;
        let state = State::new(t, 0, u, geo.project_velocity(&p));
        let class = block.classify_state(&state).unwrap();
        let seg = integrate(&s, &state, t + horizon, &Events::boundary(), &cfg).unwrap();
        let exited = seg.termination == Termination::ExitedM;
        exits += usize::from(class.is_essential_exit());
        if outward.dot(&p).abs() < band {
            banded += 1;
        } else if class.is_essential_exit() == exited {
            agree += 1;
        } else {
            disagree += 1;
        }
    }
    Line {
        pass: disagree == 0 && agree + banded == 1000,
        text: format!(
            "exit-set agreement: 1000 boundary states ({exits} classified as essential exit), {agree} agree, {disagree} disagree, {banded} inside the tangency band |(nu, p)| < {band:.4} m/s"
        ),
    }
}

fn run_find_orbit(dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_forced-surface"))
        .args(["find-orbit", "--scenario", "hemisphere_pendulum", "--out"])
        .arg(dir)
        .output()
        .unwrap()
}

fn determinism() -> Line {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, rb) = (run_find_orbit(a.path()), run_find_orbit(b.path()));
    let mut identical = ra.status.success() && rb.status.success();
    let mut files = 0;
    for name in ["orbit.json", "orbit_trajectory.csv", "hypotheses.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap_or_default();
        let y = std::fs::read(b.path().join(name)).unwrap_or_default();
        identical &= !x.is_empty() && x == y;
        files += 1;
    }

    let mut worst: f64 = 0.0;
    let mut configs: Vec<ScenarioConfig> = BUILTIN_NAMES
        .iter()
        .map(|n| builtin_config(n, &BuiltinParams::default()).unwrap())
        .collect();
    for entry in std::fs::read_dir(examples()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") && !path.to_string_lossy().contains("mesh") {
            configs.push(ScenarioConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap());
        }
    }
    let count = configs.len();
    for config in configs {
        let back = ScenarioConfig::from_toml(&config.to_toml()).unwrap();
        let x = Scenario::from_config(config, None).unwrap();
        let y = Scenario::from_config(back, None).unwrap();
        let chart_x = x.surface.home();
        let chart_y = y.surface.home();
        for i in 1..=200 {
            let u = chart_x.interior_point([halton(i, 0), halton(i, 1)]);
            let v = [4.0 * halton(i, 2) - 2.0, 4.0 * halton(i, 3) - 2.0];
            let t = x.period() * halton(i, 4);
            let a = rhs(&x, chart_x, t, u, v).unwrap();
            let b = rhs(&y, chart_y, t, u, v).unwrap();
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    Line {
        pass: identical && worst <= 1e-12,
        text: format!(
            "determinism and round trip: two find-orbit runs {} on {files} files; {count} configs round-trip with max rhs difference {worst:.1e}",
            if identical { "byte-identical" } else { "differ" }
        ),
    }
}

type Criterion = (&'static str, f64, Box<dyn Fn() -> Line>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1", 1.0, Box::new(topology)),
        ("2", 10.0, Box::new(energy_shell)),
        ("3", 30.0, Box::new(tangency_discrimination)),
        ("4", f64::INFINITY, Box::new(equilibrium)),
        ("5", 60.0, Box::new(|| guaranteed_orbit("half_circle_pendulum"))),
        ("6", 120.0, Box::new(|| guaranteed_orbit("hemisphere_pendulum"))),
        ("7", f64::INFINITY, Box::new(integrator_order)),
        ("8", f64::INFINITY, Box::new(exit_agreement)),
        ("9", f64::INFINITY, Box::new(determinism)),
    ];
    let mut failed = 0;
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let line = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = line.pass && secs < budget;
        failed += usize::from(!pass);
        let limit = if budget.is_finite() { format!(", limit {budget} s") } else { String::new() };
        println!("[{}] {id}. {} ({secs:.2} s{limit})", if pass { "PASS" } else { "FAIL" }, line.text);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
