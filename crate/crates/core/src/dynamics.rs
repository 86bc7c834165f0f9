//! Equations of motion of the forced point with friction, in chart coordinates.
//!
//! In a chart the normal reaction drops out and the motion reads
//!
//! ```text
//! üᵏ = −Γᵏᵢⱼ u̇ⁱ u̇ʲ + gᵏˡ (F_total − γ ṙ) · ∂ₗr
//! ```
//!
//! with `F_total = F(t, q, p) + g⃗ − a(t)`, the last term being the inertia
//! force of a surface whose frame moves with acceleration `a(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Chart, Coords, LocalGeometry, Surface, Vec3};
use crate::scenarios::ScenarioConfig;

/// `c cos(2πkt/T) + s sin(2πkt/T)`; order 0 is the constant `c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Finite trigonometric series in the phase `t / T`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPolynomial(pub Vec<Harmonic>);

impl TrigPolynomial {
    pub fn constant(value: f64) -> Self {
        Self(vec![Harmonic {
            order: 0,
            cos: value,
            sin: 0.0,
        }])
    }

    pub fn sine(order: u32, amplitude: f64) -> Self {
        Self(vec![Harmonic {
            order,
            cos: 0.0,
            sin: amplitude,
        }])
    }

    /// Value at `phase ∈ [0, 1)`.
    pub fn eval(&self, phase: f64) -> f64 {
        self.0
            .iter()
            .map(|h| {
                if h.order == 0 {
                    h.cos
                } else {
                    let a = std::f64::consts::TAU * h.order as f64 * phase;
                    h.cos * a.cos() + h.sin * a.sin()
                }
            })
            .sum()
    }

    /// `Σ |c| + |s|`, an upper bound of `|eval|`.
    pub fn bound(&self) -> f64 {
        self.0
            .iter()
            .map(|h| if h.order == 0 { h.cos.abs() } else { h.cos.abs() + h.sin.abs() })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|h| h.cos == 0.0 && (h.order == 0 || h.sin == 0.0))
    }
}

/// Position of `t` within its period, in `[0, 1)`.
pub fn phase(t: f64, period: f64) -> f64 {
    t.rem_euclid(period) / period
}

/// The T-periodic applied force and the prescribed motion of the surface frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingLaw {
    pub period: f64,
    /// Applied force `F(t)` per axis, newtons (unit mass).
    pub applied: [TrigPolynomial; 3],
    /// Linear velocity dependence `F += B p`.
    pub velocity_coupling: [[f64; 3]; 3],
    /// Horizontal acceleration `a(t)` of the surface frame.
    pub frame_acceleration: [TrigPolynomial; 2],
    /// Declared bound `F_max` on `‖F + g⃗ − a‖`.
    pub declared_bound: f64,
}

impl ForcingLaw {
    pub fn has_velocity_coupling(&self) -> bool {
        self.velocity_coupling.iter().flatten().any(|&x| x != 0.0)
    }

    pub fn applied_force(&self, t: f64, p: &Vec3) -> Vec3 {
        let ph = phase(t, self.period);
        let mut f = Vec3::new(self.applied[0].eval(ph), self.applied[1].eval(ph), self.applied[2].eval(ph));
        if self.has_velocity_coupling() {
            for (i, row) in self.velocity_coupling.iter().enumerate() {
                f[i] += row[0] * p.x + row[1] * p.y + row[2] * p.z;
            }
        }
        f
    }

    /// Inertia force `−a(t)` felt in the frame of the moving surface.
    pub fn frame_inertia(&self, t: f64) -> Vec3 {
        let ph = phase(t, self.period);
        -Vec3::new(self.frame_acceleration[0].eval(ph), self.frame_acceleration[1].eval(ph), 0.0)
    }

    /// Triangle-inequality bound of `‖F + g⃗ − a‖` over all times, infinite with velocity coupling.
    pub fn template_bound(&self, gravity: &Vec3) -> f64 {
        if self.has_velocity_coupling() {
            return f64::INFINITY;
        }
        let x = gravity.x.abs() + self.applied[0].bound() + self.frame_acceleration[0].bound();
        let y = gravity.y.abs() + self.applied[1].bound() + self.frame_acceleration[1].bound();
        let z = gravity.z.abs() + self.applied[2].bound();
        (x * x + y * y + z * z).sqrt()
    }
}

/// Friction coefficient `γ(t, q, p) = γ₀ + Σ harmonics(t) + γ₂ ‖p‖²`
/// with the declared lower bound `γ ≥ γ_min` for `‖p‖ > d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrictionModel {
    pub base: f64,
    pub harmonics: TrigPolynomial,
    pub quadratic: f64,
    pub threshold_speed: f64,
    pub gamma_min: f64,
}

impl FrictionModel {
    pub fn viscous(gamma: f64) -> Self {
        Self {
            base: gamma,
            harmonics: TrigPolynomial::default(),
            quadratic: 0.0,
            threshold_speed: 0.0,
            gamma_min: gamma,
        }
    }

    pub fn coefficient(&self, t: f64, period: f64, p: &Vec3) -> f64 {
        self.base + self.harmonics.eval(phase(t, period)) + self.quadratic * p.norm_squared()
    }
}

/// A complete problem instance.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub surface: Surface,
    pub forcing: ForcingLaw,
    pub friction: FrictionModel,
    pub gravity: Vec3,
    /// Source configuration, kept for serialization.
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn period(&self) -> f64 {
        self.forcing.period
    }

    pub fn force_bound(&self) -> f64 {
        self.forcing.declared_bound
    }

    /// `F + g⃗ − a`: every non-dissipative, non-constraint force.
    pub fn total_force(&self, t: f64, p: &Vec3) -> Vec3 {
        self.forcing.applied_force(t, p) + self.gravity + self.forcing.frame_inertia(t)
    }

    pub fn gamma(&self, t: f64, _q: &Vec3, p: &Vec3) -> f64 {
        self.friction.coefficient(t, self.period(), p)
    }
}

/// Chart accelerations `ü` for the state `(t, u, u̇)`.
pub fn rhs(scenario: &Scenario, chart: &dyn Chart, t: f64, u: Coords, v: Coords) -> Result<Coords> {
    let geo = LocalGeometry::at(chart, u)?;
    rhs_at(scenario, &geo, t, v)
}

pub(crate) fn rhs_at(scenario: &Scenario, geo: &LocalGeometry, t: f64, v: Coords) -> Result<Coords> {
    let p = geo.velocity(v);
    let gamma = scenario.gamma(t, &geo.point, &p);
    let force = scenario.total_force(t, &p) - p * gamma;
    if !force.iter().all(|x| x.is_finite()) {
        return Err(Error::Scenario(format!(
            "non-finite force {:?} at t = {t}",
            force.as_slice()
        )));
    }
    let driving = geo.raise(geo.lower(&force));
    let gamma_sym = geo.christoffel();
    let mut acc = [0.0; 2];
    for k in 0..geo.dim {
        let mut quad = 0.0;
        for i in 0..geo.dim {
            for j in 0..geo.dim {
                quad += gamma_sym[k][i][j] * v[i] * v[j];
            }
        }
        acc[k] = driving[k] - quad;
    }
    Ok(acc)
}

/// `‖p‖² / 2` (unit mass).
pub fn kinetic_energy(p: &Vec3) -> f64 {
    0.5 * p.norm_squared()
}

/// `dT/dt = (p, F_total) − ‖p‖² γ` for a tangent velocity `p`; the normal
/// reaction does no work.
pub fn kinetic_energy_rate(scenario: &Scenario, t: f64, q: &Vec3, p: &Vec3) -> f64 {
    p.dot(&scenario.total_force(t, p)) - p.norm_squared() * scenario.gamma(t, q, p)
}
