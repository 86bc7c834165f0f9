//! Built-in scenarios and the TOML scenario format.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{FrictionModel, ForcingLaw, Scenario, TrigPolynomial};
use crate::error::{Error, Result};
use crate::geometry::{Chart, CircleChart, Mesh, PlaneChart, PlaneRegion, RevolutionChart, Surface, Vec3};

pub const BUILTIN_NAMES: [&str; 3] = ["half_circle_pendulum", "hemisphere_pendulum", "figure1_surface"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    /// Upper half of a vertical circle of radius `length` (planar pendulum).
    HalfCircle,
    /// Upper half of a sphere of radius `length` (spherical pendulum).
    Hemisphere,
    /// Surface of revolution `ρ = R sin σ, z = H cos σ + D cos² σ`, `σ ≤ π/2`.
    Revolution,
    FlatDisk,
    FlatAnnulus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimple: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    /// How far charts extend past `∂M` (chart coordinates).
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Optional mesh file used for topology instead of the generated one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
}

fn default_margin() -> f64 {
    0.5
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    /// Horizontal acceleration of the surface frame.
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub frame_acceleration_x: TrigPolynomial,
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub frame_acceleration_y: TrigPolynomial,
    /// Applied force components, newtons per kilogram.
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub force_x: TrigPolynomial,
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub force_y: TrigPolynomial,
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub force_z: TrigPolynomial,
    /// Row-major matrix `B` of a force term `B p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_coupling: Option<[[f64; 3]; 3]>,
    /// Declared `F_max`; defaults to the triangle-inequality bound of the templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "TrigPolynomial::is_zero")]
    pub harmonics: TrigPolynomial,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub quadratic: f64,
    /// Declared speed `d` above which `γ ≥ γ_min`.
    #[serde(default)]
    pub threshold_speed: f64,
    /// Declared `γ_min`; defaults to `γ₀ − Σ|harmonics|` when `quadratic ≥ 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Integration tolerance used while shooting for periodic orbits.
    pub shooting_tol: f64,
    pub seeds: usize,
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
    pub fd_step: f64,
    /// Orbits whose minimum `b` is below this are rejected as grazing.
    pub clearance_tol: f64,
    /// Safety factor κ in the energy ceiling.
    pub ceiling_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            shooting_tol: 1e-11,
            seeds: 64,
            newton_tol: 1e-8,
            newton_max_iterations: 40,
            fd_step: 1e-6,
            clearance_tol: 1e-7,
            ceiling_safety: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub times: usize,
    pub boundary_points: usize,
    /// Signed tangential speeds per boundary point (odd counts include zero).
    pub speeds: usize,
    pub interior_points: usize,
    /// Every n-th tangency sample is confirmed by a short integration.
    pub behavioral_stride: usize,
    pub tangency_margin: f64,
    pub shell_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            times: 64,
            boundary_points: 256,
            speeds: 17,
            interior_points: 64,
            behavioral_stride: 64,
            tangency_margin: 1e-6,
            shell_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Forcing period `T`, seconds.
    pub period: f64,
    /// Magnitude of gravity along `−z`, m/s².
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub friction: FrictionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

fn default_gravity() -> f64 {
    9.81
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario configs always serialize")
    }
}

/// Parameter overrides for [`builtin`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuiltinParams {
    /// Pendulum length / surface radius, meters.
    pub length: Option<f64>,
    /// Amplitude `A` of the horizontal frame acceleration `A sin(2πt/T)`, m/s².
    pub amplitude: Option<f64>,
    /// Viscous friction coefficient `γ₀`, 1/s.
    pub gamma: Option<f64>,
    pub period: Option<f64>,
    pub gravity: Option<f64>,
}

/// Default configuration of a built-in scenario.
pub fn builtin_config(name: &str, params: &BuiltinParams) -> Result<ScenarioConfig> {
    let length = params.length.unwrap_or(1.0);
    let surface = match name {
        "half_circle_pendulum" => SurfaceConfig {
            kind: SurfaceKind::HalfCircle,
            length: Some(length),
            ..surface_template()
        },
        "hemisphere_pendulum" => SurfaceConfig {
            kind: SurfaceKind::Hemisphere,
            length: Some(length),
            ..surface_template()
        },
        "figure1_surface" => SurfaceConfig {
            kind: SurfaceKind::Revolution,
            radius: Some(length),
            height: Some(0.6 * length),
            dimple: Some(-0.4 * length),
            ..surface_template()
        },
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let amplitude = params.amplitude.unwrap_or(0.5);
    let gamma = params.gamma.unwrap_or(0.1);
    Ok(ScenarioConfig {
        name: name.to_string(),
        period: params.period.unwrap_or(1.0),
        gravity: params.gravity.unwrap_or(9.81),
        surface,
        forcing: ForcingConfig {
            frame_acceleration_x: TrigPolynomial::sine(1, amplitude),
            ..ForcingConfig::default()
        },
        friction: FrictionConfig {
            gamma,
            harmonics: TrigPolynomial::default(),
            quadratic: 0.0,
            threshold_speed: 0.0,
            gamma_min: None,
        },
        solver: SolverConfig::default(),
        sampling: SamplingConfig::default(),
    })
}

fn surface_template() -> SurfaceConfig {
    SurfaceConfig {
        kind: SurfaceKind::Hemisphere,
        length: None,
        radius: None,
        height: None,
        dimple: None,
        inner: None,
        outer: None,
        margin: default_margin(),
        mesh: None,
    }
}

/// One of [`BUILTIN_NAMES`] with optional parameter overrides.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<Scenario> {
    Scenario::from_config(builtin_config(name, params)?, None)
}

/// Loads a scenario from a TOML file; relative mesh paths resolve against the file's directory.
pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let config = ScenarioConfig::from_toml(&text)?;
    Scenario::from_config(config, path.parent())
}

/// Built-in name or path to a TOML file.
pub fn resolve(source: &str) -> Result<Scenario> {
    let path = Path::new(source);
    if BUILTIN_NAMES.contains(&source) {
        builtin(source, &BuiltinParams::default())
    } else if !path.exists() && path.extension().is_none() && path.components().count() == 1 {
        Err(Error::UnknownScenario(source.to_string()))
    } else {
        load(path)
    }
}

fn require(errors: &mut Vec<String>, value: Option<f64>, what: &str) -> f64 {
    match value {
        Some(v) if v.is_finite() && v > 0.0 => v,
        Some(v) => {
            errors.push(format!("surface.{what} must be positive and finite, got {v}"));
            1.0
        }
        None => {
            errors.push(format!("surface.{what} is required for this surface kind"));
            1.0
        }
    }
}

impl Scenario {
    /// Builds and validates a scenario; every violated invariant is reported at once.
    pub fn from_config(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Self> {
        let mut errors = Vec::new();
        if !(config.period.is_finite() && config.period > 0.0) {
            errors.push(format!("period must be positive, got {}", config.period));
        }
        if !(config.gravity.is_finite() && config.gravity >= 0.0) {
            errors.push(format!("gravity must be non-negative, got {}", config.gravity));
        }
        let s = &config.surface;
        if !(s.margin.is_finite() && s.margin > 0.0) {
            errors.push(format!("surface.margin must be positive, got {}", s.margin));
        }
        let margin = s.margin.max(1e-3);
        let name = config.name.clone();
        let (charts, generated): (Vec<Arc<dyn Chart>>, Mesh) = match s.kind {
            SurfaceKind::HalfCircle => {
                let l = require(&mut errors, s.length, "length");
                let max = FRAC_PI_2 + margin.min(1.0);
                (
                    vec![
                        Arc::new(CircleChart::new(format!("{name}/top"), l, 0.0, max)),
                        Arc::new(CircleChart::new(format!("{name}/bottom"), l, PI, max)),
                    ],
                    Mesh::arc(64, |t| {
                        let a = (t - 0.5) * PI;
                        [l * a.sin(), 0.0, l * a.cos()]
                    }),
                )
            }
            SurfaceKind::Hemisphere | SurfaceKind::Revolution => {
                let (r, h, d) = if s.kind == SurfaceKind::Hemisphere {
                    let l = require(&mut errors, s.length, "length");
                    (l, l, 0.0)
                } else {
                    let r = require(&mut errors, s.radius, "radius");
                    let h = require(&mut errors, s.height, "height");
                    let d = s.dimple.unwrap_or(0.0);
                    if !(h + d > 0.0) {
                        errors.push(format!("surface.height + surface.dimple must be positive, got {}", h + d));
                    }
                    (r, h, d)
                };
                let max = FRAC_PI_2 + margin.min(1.0);
                let pole = RevolutionChart::pole(format!("{name}/pole"), r, h, d, max);
                let mesh = Mesh::polar_cap(16, 48, |t, phi| {
                    let sigma = t * FRAC_PI_2;
                    let q = pole.position([sigma * phi.cos(), sigma * phi.sin()]);
                    [q.x, q.y, q.z]
                });
                (
                    vec![
                        Arc::new(pole),
                        Arc::new(RevolutionChart::antipode(format!("{name}/antipode"), r, h, d, max)),
                    ],
                    mesh,
                )
            }
            SurfaceKind::FlatDisk => {
                let r = require(&mut errors, s.radius, "radius");
                (
                    vec![Arc::new(PlaneChart::new(
                        format!("{name}/plane"),
                        PlaneRegion::Disk { radius: r },
                        margin,
                    ))],
                    Mesh::polar_cap(8, 32, |t, phi| [r * t * phi.cos(), r * t * phi.sin(), 0.0]),
                )
            }
            SurfaceKind::FlatAnnulus => {
                let inner = require(&mut errors, s.inner, "inner");
                let outer = require(&mut errors, s.outer, "outer");
                if inner >= outer {
                    errors.push(format!("surface.inner ({inner}) must be below surface.outer ({outer})"));
                }
                (
                    vec![Arc::new(PlaneChart::new(
                        format!("{name}/plane"),
                        PlaneRegion::Annulus { inner, outer },
                        margin.min(0.5 * inner),
                    ))],
                    Mesh::annulus(4, 48, inner, outer),
                )
            }
        };

        let mesh = match &s.mesh {
            Some(path) => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                match std::fs::read_to_string(&full) {
                    Ok(text) => match Mesh::parse(&text) {
                        Ok(m) => Some(m),
                        Err(e) => {
                            errors.push(format!("surface.mesh {}: {e}", full.display()));
                            None
                        }
                    },
                    Err(e) => {
                        errors.push(format!("surface.mesh {}: {e}", full.display()));
                        None
                    }
                }
            }
            None => Some(generated),
        };

        let f = &config.forcing;
        let forcing = ForcingLaw {
            period: config.period,
            applied: [f.force_x.clone(), f.force_y.clone(), f.force_z.clone()],
            velocity_coupling: f.velocity_coupling.unwrap_or([[0.0; 3]; 3]),
            frame_acceleration: [f.frame_acceleration_x.clone(), f.frame_acceleration_y.clone()],
            declared_bound: 0.0,
        };
        let gravity = Vec3::new(0.0, 0.0, -config.gravity);
        let declared_bound = f.force_bound.unwrap_or_else(|| forcing.template_bound(&gravity));
        if f.force_bound.is_some_and(|b| !(b >= 0.0)) {
            errors.push(format!("forcing.force_bound must be non-negative, got {declared_bound}"));
        }
        let forcing = ForcingLaw {
            declared_bound,
            ..forcing
        };

        let fr = &config.friction;
        let gamma_min = match fr.gamma_min {
            Some(g) => g,
            None if fr.quadratic >= 0.0 => fr.gamma - fr.harmonics.bound(),
            None => {
                errors.push("friction.gamma_min must be declared when friction.quadratic < 0".into());
                0.0
            }
        };
        if !fr.gamma.is_finite() || !gamma_min.is_finite() || !fr.quadratic.is_finite() {
            errors.push("friction coefficients must be finite".into());
        }
        if !(fr.threshold_speed >= 0.0) {
            errors.push(format!("friction.threshold_speed must be non-negative, got {}", fr.threshold_speed));
        }
        let friction = FrictionModel {
            base: fr.gamma,
            harmonics: fr.harmonics.clone(),
            quadratic: fr.quadratic,
            threshold_speed: fr.threshold_speed,
            gamma_min,
        };

        let sv = &config.solver;
        for (what, v) in [
            ("rtol", sv.rtol),
            ("atol", sv.atol),
            ("shooting_tol", sv.shooting_tol),
            ("newton_tol", sv.newton_tol),
            ("fd_step", sv.fd_step),
            ("clearance_tol", sv.clearance_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("solver.{what} must be positive, got {v}"));
            }
        }
        if !(sv.ceiling_safety > 1.0) {
            errors.push(format!("solver.ceiling_safety must exceed 1, got {}", sv.ceiling_safety));
        }
        if sv.seeds == 0 {
            errors.push("solver.seeds must be at least 1".into());
        }
        let sm = &config.sampling;
        if sm.times == 0 || sm.boundary_points == 0 || sm.speeds == 0 || sm.interior_points == 0 {
            errors.push("sampling densities must be positive".into());
        }
        if sm.behavioral_stride == 0 {
            errors.push("sampling.behavioral_stride must be at least 1".into());
        }

        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let surface = Surface::new(config.name.clone(), charts, mesh);
        Ok(Scenario {
            name: config.name.clone(),
            surface,
            forcing,
            friction,
            gravity,
            config,
        })
    }

    /// Coarse spot-check of the declared friction and force bounds.
    ///
    /// Findings are warnings only: the full sampled check lives in
    /// [`crate::hypotheses::check_all`].
    pub fn spot_check(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let chart = self.surface.home();
        let t_period = self.period();
        let speed = 2.0 * self.friction.threshold_speed + 1.0;
        for i in 0..8 {
            let t = t_period * i as f64 / 8.0;
            for j in 0..4 {
                let u = chart.interior_point([j as f64 / 4.0, i as f64 / 8.0]);
                let q = chart.position(u);
                let dir = chart.partials(u)[0].normalize();
                let p = dir * speed;
                let g = self.gamma(t, &q, &p);
                if g < self.friction.gamma_min {
                    warnings.push(format!(
                        "friction {g} below declared gamma_min {} at t = {t}",
                        self.friction.gamma_min
                    ));
                }
                let f = self.total_force(t, &p).norm();
                if f > self.force_bound() * (1.0 + 1e-12) {
                    warnings.push(format!("force {f} above declared bound {} at t = {t}", self.force_bound()));
                }
            }
        }
        warnings.dedup();
        warnings
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rhs;

    #[test]
    fn builtins_construct() {
        for name in BUILTIN_NAMES {
            let s = builtin(name, &BuiltinParams::default()).unwrap();
            assert_eq!(s.name, name);
            assert!(s.spot_check().is_empty(), "{name}: {:?}", s.spot_check());
        }
        assert!(matches!(
            builtin("nope", &BuiltinParams::default()),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn hemisphere_force_bound_counts_gravity() {
        let s = builtin("hemisphere_pendulum", &BuiltinParams::default()).unwrap();
        let expected = (0.5f64 * 0.5 + 9.81 * 9.81).sqrt();
        assert!((s.force_bound() - expected).abs() < 1e-12);
    }

    #[test]
    fn override_gamma_only_changes_friction() {
        let base = builtin_config("hemisphere_pendulum", &BuiltinParams::default()).unwrap();
        let mut text = base.to_toml();
        text = text.replace("gamma = 0.1", "gamma = 0.25");
        let changed = Scenario::from_config(ScenarioConfig::from_toml(&text).unwrap(), None).unwrap();
        let mut expected = base.clone();
        expected.friction.gamma = 0.25;
        assert_eq!(changed.config, expected);
        assert_eq!(changed.friction.base, 0.25);
    }

    #[test]
    fn non_positive_period_is_rejected() {
        let mut c = builtin_config("hemisphere_pendulum", &BuiltinParams::default()).unwrap();
        c.period = 0.0;
        c.surface.length = Some(-1.0);
        match Scenario::from_config(c, None) {
            Err(Error::Validation(list)) => {
                assert_eq!(list.len(), 2, "{list:?}");
                assert!(list[0].contains("period"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ScenarioConfig::from_toml("name = \"x\"\nperiod = = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn toml_round_trip_preserves_rhs() {
        for name in BUILTIN_NAMES {
            let s = builtin(name, &BuiltinParams::default()).unwrap();
            let back = Scenario::from_config(ScenarioConfig::from_toml(&s.config.to_toml()).unwrap(), None).unwrap();
            assert_eq!(back.config, s.config);
            let chart = s.surface.home();
            for k in 0..10 {
                let t = 0.137 * k as f64;
                let u = chart.interior_point([0.09 * k as f64, 0.3]);
                let v = [0.4 - 0.1 * k as f64, 0.2];
                let a = rhs(&s, chart, t, u, v).unwrap();
                let b = rhs(&back, back.surface.home(), t, u, v).unwrap();
                assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
            }
        }
    }
}
