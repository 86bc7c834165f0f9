//! Sampled checks of the four existence conditions and the block they build.
//!
//! 1. `χ(M) ≠ 0`, read from the surface mesh.
//! 2. `γ ≥ γ_min > 0` whenever `‖p‖ > d`.
//! 3. `‖F + g⃗ − a‖ ≤ F_max`.
//! 4. External tangency: every motion starting tangent to `∂M` leaves `M` at once.
//!
//! Conditions 2 and 3 fix the energy ceiling `c`. The block is then
//! `W = [0, T] × {q ∈ M, ‖p‖²/2 ≤ c}`, and its exit set is classified by
//! the sign of `(ν_q, p)`.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::{kinetic_energy, kinetic_energy_rate, rhs_at, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{
    boundary_tangent, exit_index, outward_normal, Chart, Coords, LocalGeometry, MeshCounts, Vec3, BOUNDARY_TOL,
};
use crate::integrate::{integrate, Events, IntegratorConfig, State};
use crate::sampling::{halton, map_indices};
use crate::scenarios::SamplingConfig;

/// Default safety factor κ of the energy ceiling.
pub const CEILING_SAFETY: f64 = 1.1;

/// At most this many violating samples are listed per check; the count is always exact.
pub const MAX_LISTED: usize = 100;

/// `c = ½ (κ max(d, F_max / γ_min))²`.
///
/// On the shell `‖p‖²/2 = c` this gives `‖p‖² γ ≥ ‖p‖² γ_min > ‖p‖ F_max ≥ (p, F)`,
/// so the kinetic energy strictly decreases there.
pub fn energy_ceiling(d: f64, gamma_min: f64, f_max: f64, safety: f64) -> Result<f64> {
    if !(gamma_min > 0.0) {
        return Err(Error::NonPositiveFriction(gamma_min));
    }
    if !f_max.is_finite() {
        return Err(Error::UnboundedForce);
    }
    if !(d >= 0.0) || !(f_max >= 0.0) || !(safety > 1.0) {
        return Err(Error::Precondition(format!(
            "need d >= 0, F_max >= 0 and safety > 1 (got d = {d}, F_max = {f_max}, safety = {safety})"
        )));
    }
    let speed = safety * d.max(f_max / gamma_min);
    Ok(0.5 * speed * speed)
}

/// One sampled phase-space point with the checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRecord {
    pub t: f64,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub value: f64,
}

impl SampleRecord {
    fn new(t: f64, q: &Vec3, p: &Vec3, value: f64) -> Self {
        Self {
            t,
            q: [q.x, q.y, q.z],
            p: [p.x, p.y, p.z],
            value,
        }
    }

    fn key(&self) -> [f64; 8] {
        [self.value, self.t, self.q[0], self.q[1], self.q[2], self.p[0], self.p[1], self.p[2]]
    }
}

fn by_key(a: &SampleRecord, b: &SampleRecord) -> Ordering {
    a.key()
        .iter()
        .zip(b.key().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sorts ascending by value (ties by position) and keeps the first [`MAX_LISTED`].
fn listed(mut records: Vec<SampleRecord>) -> Vec<SampleRecord> {
    records.sort_by(by_key);
    records.truncate(MAX_LISTED);
    records
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologyCheck {
    pub counts: Option<MeshCounts>,
    pub euler_characteristic: Option<i64>,
    pub exit_index: Option<i64>,
    pub pass: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrictionCheck {
    pub threshold_speed: f64,
    pub declared_gamma_min: f64,
    pub sampled_min: f64,
    pub max_speed: f64,
    pub samples: usize,
    pub violation_count: usize,
    pub violations: Vec<SampleRecord>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForceCheck {
    pub declared_bound: f64,
    pub sampled_max: f64,
    pub velocity_coupling: bool,
    pub samples: usize,
    pub violation_count: usize,
    /// Largest offenders first, value is `‖F_total‖`.
    pub violations: Vec<SampleRecord>,
    pub pass: bool,
}

/// One condition-4 sample: `margin = −d²b/dt²` at the start, `outward_push = (ν_q, ṗ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencySample {
    pub t: f64,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub margin: f64,
    pub outward_push: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencyCheck {
    pub samples: usize,
    pub margin_tolerance: f64,
    pub min_margin: f64,
    pub max_abs_margin: f64,
    pub max_abs_outward_push: f64,
    /// Largest tangential speed sampled, `√(2c)`.
    pub speed_cap: f64,
    pub violation_count: usize,
    /// Samples with margin equal to the tolerance; they count as failures.
    pub indeterminate: usize,
    pub violations: Vec<TangencySample>,
    pub worst: Vec<TangencySample>,
    pub behavioral_checked: usize,
    pub behavioral_disagreements: Vec<TangencySample>,
    pub pass: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellCheck {
    pub samples: usize,
    pub max_rate: f64,
    pub violation_count: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub scenario: String,
    pub topology: TopologyCheck,
    pub friction: FrictionCheck,
    pub force: ForceCheck,
    pub tangency: TangencyCheck,
    pub ceiling: Option<f64>,
    pub ceiling_safety: f64,
    pub shell: Option<ShellCheck>,
    pub verdict: bool,
    pub failures: Vec<String>,
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl HypothesisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let t = &self.topology;
        let _ = match (t.euler_characteristic, &t.counts) {
            (Some(chi), Some(c)) => writeln!(
                s,
                "[{}] condition 1 (topology): chi(M) = {chi}, exit index {} (V = {}, E = {}, F = {}, {} boundary component(s))",
                mark(t.pass),
                t.exit_index.map_or("n/a".to_string(), |x| x.to_string()),
                c.vertices,
                c.edges,
                c.faces,
                c.boundary_components
            ),
            _ => writeln!(s, "[{}] condition 1 (topology): {}", mark(t.pass), t.note),
        };
        let f = &self.friction;
        let _ = writeln!(
            s,
            "[{}] condition 2 (friction): declared gamma_min = {} for |p| > {}; sampled minimum {} over {} samples (|p| up to {:.4}); {} violation(s)",
            mark(f.pass),
            f.declared_gamma_min,
            f.threshold_speed,
            f.sampled_min,
            f.samples,
            f.max_speed,
            f.violation_count
        );
        let g = &self.force;
        let _ = writeln!(
            s,
            "[{}] condition 3 (force bound): declared F_max = {}; sampled maximum {} over {} samples; {} violation(s){}",
            mark(g.pass),
            g.declared_bound,
            g.sampled_max,
            g.samples,
            g.violation_count,
            if g.velocity_coupling { "; velocity coupling makes the force unbounded" } else { "" }
        );
        let k = &self.tangency;
        let _ = writeln!(
            s,
            "[{}] condition 4 (external tangency): min margin {:.6e} (tolerance {:e}) over {} samples; max |(nu, dp/dt)| {:.3e}; {} violation(s), {} indeterminate; {} behavioural check(s), {} disagreement(s)",
            mark(k.pass),
            k.min_margin + 0.0,
            k.margin_tolerance,
            k.samples,
            k.max_abs_outward_push,
            k.violation_count,
            k.indeterminate,
            k.behavioral_checked,
            k.behavioral_disagreements.len()
        );
        for w in k.violations.iter().take(5) {
            let _ = writeln!(
                s,
                "    violation t = {:.6} q = ({:.6}, {:.6}, {:.6}) p = ({:.6}, {:.6}, {:.6}) margin = {:.3e}",
                w.t, w.q[0], w.q[1], w.q[2], w.p[0], w.p[1], w.p[2], w.margin + 0.0
            );
        }
        let _ = writeln!(s, "    {}", k.note);
        match self.ceiling {
            Some(c) => {
                let _ = writeln!(s, "energy ceiling c = {c} J (safety factor {})", self.ceiling_safety);
            }
            None => {
                let _ = writeln!(s, "energy ceiling: not available");
            }
        }
        if let Some(sh) = &self.shell {
            let _ = writeln!(
                s,
                "[{}] energy shell: max dT/dt = {:.6e} over {} samples",
                mark(sh.pass),
                sh.max_rate,
                sh.samples
            );
        }
        let _ = writeln!(s, "verdict: {}", mark(self.verdict));
        for f in &self.failures {
            let _ = writeln!(s, "  - {f}");
        }
        s
    }
}

/// Embedded velocity of speed `speed` in direction `angle` of the tangent plane at `u`.
fn tangent_velocity(chart: &dyn Chart, geo: &LocalGeometry, u: Coords, speed: f64, angle: f64) -> Vec3 {
    let e1 = geo.partials[0].normalize();
    if chart.dim() == 1 {
        return e1 * speed * angle.cos().signum();
    }
    let e2 = chart.normal(u).cross(&e1).normalize();
    (e1 * angle.cos() + e2 * angle.sin()) * speed
}

/// Grid over `[0,T) × M × {‖p‖ ∈ (lo, hi]}` visited in parallel over time slices.
fn interior_grid<T: Send>(
    scenario: &Scenario,
    sampling: &SamplingConfig,
    lo: f64,
    hi: f64,
    visit: impl Fn(f64, &Vec3, &Vec3) -> T + Sync + Send,
) -> Vec<Vec<T>> {
    let chart = scenario.surface.home();
    let period = scenario.period();
    map_indices(sampling.times, |i| {
        let t = period * i as f64 / sampling.times as f64;
        let mut out = Vec::with_capacity(sampling.interior_points * sampling.speeds);
        for j in 0..sampling.interior_points {
            let u = chart.interior_point([halton(j, 0), halton(j, 1)]);
            let Ok(geo) = LocalGeometry::at(chart, u) else {
                continue;
            };
            for k in 1..=sampling.speeds {
                let speed = lo + (hi - lo) * k as f64 / sampling.speeds as f64;
                let angle = TAU * halton(j * sampling.speeds + k, 2);
                let p = tangent_velocity(chart, &geo, u, speed, angle);
                out.push(visit(t, &geo.point, &p));
            }
        }
        out
    })
}

fn sampled_speed_cap(scenario: &Scenario) -> f64 {
    let fr = &scenario.friction;
    match energy_ceiling(
        fr.threshold_speed,
        fr.gamma_min,
        scenario.force_bound(),
        scenario.config.solver.ceiling_safety,
    ) {
        Ok(c) => (2.0 * c).sqrt(),
        Err(_) => (2.0 * fr.threshold_speed).max(10.0),
    }
}

/// Condition 2 on `[0,T) × M × {d < ‖p‖ ≤ p_max}`.
pub fn check_friction_bound(scenario: &Scenario, sampling: &SamplingConfig, p_max: f64) -> FrictionCheck {
    let fr = &scenario.friction;
    let d = fr.threshold_speed;
    let floor = fr.gamma_min * (1.0 - 1e-6);
    let slices = interior_grid(scenario, sampling, d, p_max.max(d), |t, q, p| {
        SampleRecord::new(t, q, p, scenario.gamma(t, q, p))
    });
    let mut samples = 0;
    let mut sampled_min = f64::INFINITY;
    let mut violations = Vec::new();
    for rec in slices.into_iter().flatten() {
        samples += 1;
        sampled_min = sampled_min.min(rec.value);
        if !(rec.value >= floor) {
            violations.push(rec);
        }
    }
    let violation_count = violations.len();
    FrictionCheck {
        threshold_speed: d,
        declared_gamma_min: fr.gamma_min,
        sampled_min,
        max_speed: p_max.max(d),
        samples,
        violation_count,
        violations: listed(violations),
        pass: fr.gamma_min > 0.0 && violation_count == 0,
    }
}

/// Condition 3 on `[0,T) × M × {0 < ‖p‖ ≤ p_max}`.
pub fn check_force_bound(scenario: &Scenario, sampling: &SamplingConfig, p_max: f64) -> ForceCheck {
    let bound = scenario.force_bound();
    let slices = interior_grid(scenario, sampling, 0.0, p_max, |t, q, p| {
        // stored negated so the listing puts the largest forces first
        SampleRecord::new(t, q, p, -scenario.total_force(t, p).norm())
    });
    let mut samples = 0;
    let mut sampled_max: f64 = 0.0;
    let mut violations = Vec::new();
    for rec in slices.into_iter().flatten() {
        samples += 1;
        let value = -rec.value;
        sampled_max = sampled_max.max(value);
        if !(value <= bound * (1.0 + 1e-9)) {
            violations.push(rec);
        }
    }
    let violation_count = violations.len();
    let mut violations = listed(violations);
    for v in &mut violations {
        v.value = -v.value;
    }
    let velocity_coupling = scenario.forcing.has_velocity_coupling();
    ForceCheck {
        declared_bound: bound,
        sampled_max,
        velocity_coupling,
        samples,
        violation_count,
        violations,
        pass: !velocity_coupling && bound.is_finite() && violation_count == 0,
    }
}

/// Condition 1 from the surface mesh.
pub fn check_topology(scenario: &Scenario) -> TopologyCheck {
    let Some(mesh) = &scenario.surface.mesh else {
        return TopologyCheck {
            counts: None,
            euler_characteristic: None,
            exit_index: None,
            pass: false,
            note: "no mesh available, chi(M) unknown".into(),
        };
    };
    match mesh.counts() {
        Ok(counts) => {
            let chi = counts.euler_characteristic;
            let index = exit_index(mesh, counts.boundary_components).ok();
            TopologyCheck {
                counts: Some(counts),
                euler_characteristic: Some(chi),
                exit_index: index,
                pass: chi != 0,
                note: if chi != 0 {
                    format!("chi(M) = {chi} is nonzero")
                } else {
                    "chi(M) = 0".into()
                },
            }
        }
        Err(e) => TopologyCheck {
            counts: None,
            euler_characteristic: None,
            exit_index: None,
            pass: false,
            note: e.to_string(),
        },
    }
}

/// Margin `μ = −d²/dt² b(u(t))` at `t` and the in-surface push `(ν, ṗ)` for a boundary state.
pub fn tangency_margin(scenario: &Scenario, chart: &dyn Chart, t: f64, u: Coords, v: Coords) -> Result<(f64, f64)> {
    let geo = LocalGeometry::at(chart, u)?;
    let acc = rhs_at(scenario, &geo, t, v)?;
    let grad = chart.boundary_gradient(u);
    let hess = chart.boundary_hessian(u);
    let n = chart.dim();
    let mut b2 = 0.0;
    for i in 0..n {
        b2 += grad[i] * acc[i];
        for j in 0..n {
            b2 += v[i] * hess[i][j] * v[j];
        }
    }
    let nu = outward_normal(chart, &geo, u)?;
    let push = nu.dot(&geo.acceleration(v, acc));
    Ok((-b2, push))
}

/// Signed tangential speeds `v_max (2k/(n−1) − 1)`; a single speed means `p = 0`.
fn signed_speeds(n: usize, v_max: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|k| v_max * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).collect()
}

/// Boundary points of the home chart, without duplicates (curves have only two).
fn boundary_points(chart: &dyn Chart, n: usize) -> Vec<Coords> {
    let mut out: Vec<Coords> = Vec::new();
    for j in 0..n {
        if let Some(u) = chart.boundary_point(j as f64 / n as f64) {
            if !out.contains(&u) {
                out.push(u);
            }
        }
    }
    out
}

/// Short integration from a boundary state; true when `b` ends clearly below its start.
pub fn leaves_quickly(scenario: &Scenario, state: &State) -> Result<bool> {
    let horizon = 1e-3 * scenario.period();
    let config = IntegratorConfig::with_tolerance(1e-12);
    let seg = integrate(scenario, state, state.t + horizon, &Events::none(), &config)?;
    let b0 = state.boundary_value(&scenario.surface);
    let b1 = seg.last().boundary_value(&scenario.surface);
    Ok(b1 < -(b0.abs() + 1e-13))
}

/// Condition 4 over `[0,T) × ∂M × {p₀ ∈ T(∂M), ‖p₀‖ ≤ speed_cap}`.
pub fn check_external_tangency(scenario: &Scenario, sampling: &SamplingConfig, speed_cap: f64) -> TangencyCheck {
    let surface = &scenario.surface;
    let chart = surface.home();
    let points = boundary_points(chart, sampling.boundary_points);
    let speeds = if chart.dim() == 1 {
        vec![0.0]
    } else {
        signed_speeds(sampling.speeds, speed_cap)
    };
    let tol = sampling.tangency_margin;
    let period = scenario.period();
    let per_time = points.len() * speeds.len();
    let stride = sampling.behavioral_stride.max(1);

    let slices = map_indices(sampling.times, |i| {
        let t = period * i as f64 / sampling.times as f64;
        let mut out = Vec::with_capacity(per_time);
        for (j, &u) in points.iter().enumerate() {
            let Ok(geo) = LocalGeometry::at(chart, u) else {
                continue;
            };
            let tangent = boundary_tangent(chart, u).unwrap_or([0.0, 0.0]);
            for (k, &s) in speeds.iter().enumerate() {
                let v = [tangent[0] * s, tangent[1] * s];
                let p = geo.velocity(v);
                let (margin, push) = tangency_margin(scenario, chart, t, u, v).unwrap_or((f64::NAN, f64::NAN));
                let sample = TangencySample {
                    t,
                    q: [geo.point.x, geo.point.y, geo.point.z],
                    p: [p.x, p.y, p.z],
                    margin,
                    outward_push: push,
                };
                let index = i * per_time + j * speeds.len() + k;
                let behavior = if index.is_multiple_of(stride) {
                    Some(leaves_quickly(scenario, &State::new(t, 0, u, v)).unwrap_or(false))
                } else {
                    None
                };
                out.push((sample, behavior));
            }
        }
        out
    });

    let mut samples = 0;
    let mut min_margin = f64::INFINITY;
    let mut max_abs_margin: f64 = 0.0;
    let mut max_abs_push: f64 = 0.0;
    let mut indeterminate = 0;
    let mut violations = Vec::new();
    let mut all = Vec::new();
    let mut behavioral_checked = 0;
    let mut disagreements = Vec::new();
    for (sample, behavior) in slices.into_iter().flatten() {
        samples += 1;
        min_margin = min_margin.min(sample.margin);
        max_abs_margin = max_abs_margin.max(sample.margin.abs());
        max_abs_push = max_abs_push.max(sample.outward_push.abs());
        let predicted_exit = sample.margin > tol;
        if sample.margin == tol {
            indeterminate += 1;
        }
        if !predicted_exit {
            violations.push(sample.clone());
        }
        if let Some(exited) = behavior {
            behavioral_checked += 1;
            if sample.margin.abs() > tol && exited != predicted_exit {
                disagreements.push(sample.clone());
            }
        }
        all.push(sample);
    }
    if samples == 0 {
        min_margin = f64::NAN;
    }
    let sort = |v: &mut Vec<TangencySample>| {
        v.sort_by(|a, b| {
            a.margin
                .total_cmp(&b.margin)
                .then(a.t.total_cmp(&b.t))
                .then(a.q.partial_cmp(&b.q).unwrap_or(Ordering::Equal))
                .then(a.p.partial_cmp(&b.p).unwrap_or(Ordering::Equal))
        });
    };
    let violation_count = violations.len();
    sort(&mut violations);
    violations.truncate(MAX_LISTED);
    sort(&mut all);
    all.truncate(5);
    sort(&mut disagreements);
    let pass = samples > 0 && violation_count == 0 && indeterminate == 0 && disagreements.is_empty();
    let note = if chart.dim() == 1 {
        "the boundary of a curve is a set of points; its tangent space holds only p = 0".to_string()
    } else {
        format!(
            "tangential speeds sampled up to sqrt(2c) = {speed_cap:.6} m/s only; faster tangent states lie outside the block"
        )
    };
    TangencyCheck {
        samples,
        margin_tolerance: tol,
        min_margin,
        max_abs_margin,
        max_abs_outward_push: max_abs_push,
        speed_cap,
        violation_count,
        indeterminate,
        violations,
        worst: all,
        behavioral_checked,
        behavioral_disagreements: disagreements,
        pass,
        note,
    }
}

/// `dT/dt` on `n` quasi-random points of the shell `‖p‖²/2 = c`; passes when all are negative.
pub fn check_energy_shell(scenario: &Scenario, ceiling: f64, n: usize) -> ShellCheck {
    let chart = scenario.surface.home();
    let speed = (2.0 * ceiling).sqrt();
    let period = scenario.period();
    let rates = map_indices(n, |i| {
        let u = chart.interior_point([halton(i + 1, 0), halton(i + 1, 1)]);
        let Ok(geo) = LocalGeometry::at(chart, u) else {
            return f64::NAN;
        };
        let t = period * halton(i + 1, 2);
        let p = tangent_velocity(chart, &geo, u, speed, TAU * halton(i + 1, 3));
        kinetic_energy_rate(scenario, t, &geo.point, &p)
    });
    let max_rate = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violation_count = rates.iter().filter(|r| !(**r < 0.0)).count();
    ShellCheck {
        samples: n,
        max_rate,
        violation_count,
        pass: violation_count == 0,
    }
}

/// Runs all four conditions and builds the energy ceiling.
pub fn check_all(scenario: &Scenario) -> HypothesisReport {
    let sampling = &scenario.config.sampling;
    let safety = scenario.config.solver.ceiling_safety;
    let fr = &scenario.friction;
    let ceiling = energy_ceiling(fr.threshold_speed, fr.gamma_min, scenario.force_bound(), safety);
    let speed_cap = sampled_speed_cap(scenario);

    let topology = check_topology(scenario);
    let friction = check_friction_bound(scenario, sampling, speed_cap);
    let force = check_force_bound(scenario, sampling, speed_cap);
    let tangency = check_external_tangency(scenario, sampling, speed_cap);
    let shell = ceiling
        .as_ref()
        .ok()
        .map(|&c| check_energy_shell(scenario, c, sampling.shell_samples));

    let mut failures = Vec::new();
    if !topology.pass {
        failures.push(format!("condition 1: {}", topology.note));
    }
    if !friction.pass {
        failures.push(format!(
            "condition 2: sampled friction minimum {} against declared gamma_min {}",
            friction.sampled_min, friction.declared_gamma_min
        ));
    }
    if !force.pass {
        failures.push(format!(
            "condition 3: sampled force maximum {} against declared F_max {}",
            force.sampled_max, force.declared_bound
        ));
    }
    if !tangency.pass {
        failures.push(format!(
            "condition 4: {} of {} tangent boundary samples have margin <= {:e} (min {:e})",
            tangency.violation_count, tangency.samples, tangency.margin_tolerance, tangency.min_margin
        ));
    }
    if let Err(e) = &ceiling {
        failures.push(format!("energy ceiling: {e}"));
    }
    if let Some(sh) = &shell {
        if !sh.pass {
            failures.push(format!("energy shell: dT/dt reaches {:e}", sh.max_rate));
        }
    }
    let verdict = failures.is_empty();
    HypothesisReport {
        scenario: scenario.name.clone(),
        topology,
        friction,
        force,
        tangency,
        ceiling: ceiling.ok(),
        ceiling_safety: safety,
        shell,
        verdict,
        failures,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitClass {
    Interior,
    EssentialExit,
    Entry,
    Tangent,
}

impl ExitClass {
    /// Tangent states belong to the essential exit set `{(ν_q, p) ≥ 0}`.
    pub fn is_essential_exit(self) -> bool {
        matches!(self, ExitClass::EssentialExit | ExitClass::Tangent)
    }
}

/// The block `W = [0, T] × {q ∈ M, ‖p‖²/2 ≤ c}` of a scenario.
#[derive(Clone, Copy, Debug)]
pub struct BlockSpec<'a> {
    pub scenario: &'a Scenario,
    pub ceiling: f64,
    /// `|(ν_q, p)|` below this is tangent.
    pub tangency_tol: f64,
}

impl<'a> BlockSpec<'a> {
    pub fn new(scenario: &'a Scenario, ceiling: f64) -> Result<Self> {
        if !(ceiling > 0.0) || !ceiling.is_finite() {
            return Err(Error::Precondition(format!("block ceiling must be positive, got {ceiling}")));
        }
        Ok(Self {
            scenario,
            ceiling,
            tangency_tol: 1e-9,
        })
    }

    /// Block of a scenario with the ceiling of its declared bounds.
    pub fn for_scenario(scenario: &'a Scenario) -> Result<Self> {
        let fr = &scenario.friction;
        let c = energy_ceiling(
            fr.threshold_speed,
            fr.gamma_min,
            scenario.force_bound(),
            scenario.config.solver.ceiling_safety,
        )?;
        Self::new(scenario, c)
    }

    pub fn period(&self) -> f64 {
        self.scenario.period()
    }

    pub fn contains(&self, state: &State) -> Result<bool> {
        let surface = &self.scenario.surface;
        Ok(state.boundary_value(surface) >= -BOUNDARY_TOL
            && state.kinetic_energy(surface)? <= self.ceiling * (1.0 + 1e-12))
    }

    /// Classification of a state given in chart coordinates.
    pub fn classify_state(&self, state: &State) -> Result<ExitClass> {
        let surface = &self.scenario.surface;
        let chart = surface.chart(state.chart);
        let geo = LocalGeometry::at(chart, state.u)?;
        let p = geo.velocity(state.v);
        let b = chart.boundary(state.u);
        let energy = kinetic_energy(&p);
        if b < -BOUNDARY_TOL || energy > self.ceiling * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "state lies outside the block (b = {b:e}, kinetic energy {energy} > c = {})",
                self.ceiling
            )));
        }
        if b > BOUNDARY_TOL {
            return Ok(ExitClass::Interior);
        }
        let s = outward_normal(chart, &geo, state.u)?.dot(&p);
        Ok(if s > self.tangency_tol {
            ExitClass::EssentialExit
        } else if s < -self.tangency_tol {
            ExitClass::Entry
        } else {
            ExitClass::Tangent
        })
    }
}

/// Exit-set class of the embedded state `(t, q, p)`.
pub fn classify_exit(block: &BlockSpec, t: f64, q: &Vec3, p: &Vec3) -> Result<ExitClass> {
    let state = State::from_embedded(&block.scenario.surface, t, q, p, 1e-9)
        .map_err(|e| Error::Precondition(format!("point is not on the surface: {e}")))?;
    block.classify_state(&state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin, BuiltinParams};

    #[test]
    fn ceiling_examples() {
        assert!((energy_ceiling(0.5, 1.0, 2.0, 1.1).unwrap() - 2.42).abs() < 1e-12);
        assert!((energy_ceiling(1.0, 1.0, 0.0, 1.1).unwrap() - 0.605).abs() < 1e-12);
        let c1 = energy_ceiling(0.1, 0.5, 3.0, 1.1).unwrap();
        let c2 = energy_ceiling(0.1, 0.5, 6.0, 1.1).unwrap();
        assert!((c2 / c1 - 4.0).abs() < 1e-12);
        assert!(matches!(energy_ceiling(0.0, 0.0, 1.0, 1.1), Err(Error::NonPositiveFriction(_))));
        assert!(matches!(energy_ceiling(0.0, 1.0, f64::INFINITY, 1.1), Err(Error::UnboundedForce)));
    }

    #[test]
    fn ceiling_beats_the_force_on_the_shell() {
        let c = energy_ceiling(0.5, 1.0, 2.0, 1.1).unwrap();
        let speed = (2.0 * c).sqrt();
        assert!(speed * speed * 1.0 > speed * 2.0);
    }

    #[test]
    fn signed_speeds_include_zero() {
        let s = signed_speeds(17, 4.0);
        assert_eq!(s.len(), 17);
        assert_eq!(s[8], 0.0);
        assert_eq!(s[0], -4.0);
        assert_eq!(s[16], 4.0);
    }

    #[test]
    fn classifier_on_hemisphere() {
        let s = builtin("hemisphere_pendulum", &BuiltinParams::default()).unwrap();
        let block = BlockSpec::for_scenario(&s).unwrap();
        let apex = Vec3::new(0.0, 0.0, 1.0);
        let small = Vec3::new(0.1, 0.0, 0.0);
        assert_eq!(classify_exit(&block, 0.0, &apex, &small).unwrap(), ExitClass::Interior);
        let equator = Vec3::new(1.0, 0.0, 0.0);
        let down = Vec3::new(0.0, 0.0, -0.5);
        assert_eq!(classify_exit(&block, 0.0, &equator, &down).unwrap(), ExitClass::EssentialExit);
        let up = Vec3::new(0.0, 0.0, 0.5);
        assert_eq!(classify_exit(&block, 0.0, &equator, &up).unwrap(), ExitClass::Entry);
        let along = Vec3::new(0.0, 0.7, 0.0);
        let class = classify_exit(&block, 0.0, &equator, &along).unwrap();
        assert_eq!(class, ExitClass::Tangent);
        assert!(class.is_essential_exit());
        let below = Vec3::new(0.9, 0.0, -(1.0f64 - 0.81).sqrt());
        assert!(matches!(
            classify_exit(&block, 0.0, &below, &Vec3::zeros()),
            Err(Error::Precondition(_))
        ));
        let fast = Vec3::new(1e3, 0.0, 0.0);
        assert!(classify_exit(&block, 0.0, &apex, &fast).is_err());
    }

    #[test]
    fn hemisphere_margin_is_gravity_at_rest() {
        let s = builtin("hemisphere_pendulum", &BuiltinParams::default()).unwrap();
        let chart = s.surface.home();
        let u = chart.boundary_point(0.3).unwrap();
        let (mu, push) = tangency_margin(&s, chart, 0.0, u, [0.0, 0.0]).unwrap();
        assert!((mu - 9.81).abs() < 1e-6, "{mu}");
        assert!((push - 9.81).abs() < 1e-6, "{push}");
    }
}
