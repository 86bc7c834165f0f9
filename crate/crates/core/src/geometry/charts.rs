use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use super::{Chart, Coords, Vec3};

/// Maps `[0,1)` onto `[-1,1)` with `0 ↦ 0`.
pub(crate) fn symmetric(x: f64) -> f64 {
    if x < 0.5 {
        2.0 * x
    } else {
        2.0 * x - 2.0
    }
}

/// `cos √w`, `sin √w / √w` and their first two derivatives in `w`.
///
/// Working in `w = |u|²` keeps azimuthal charts smooth through their centre.
#[derive(Clone, Copy, Debug)]
struct RadialTrig {
    c: [f64; 3],
    s: [f64; 3],
}

impl RadialTrig {
    fn new(w: f64) -> Self {
        let s = if w < 1.0 {
            // Σ a_k w^k with a_k = (-1)^k / (2k+1)!, differentiated term by term
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            let mut a = 1.0;
            let mut pow = [1.0, 0.0, 0.0]; // w^k, w^(k-1), w^(k-2)
            for k in 0..18u32 {
                let kf = k as f64;
                s0 += a * pow[0];
                s1 += kf * a * pow[1];
                s2 += kf * (kf - 1.0) * a * pow[2];
                pow = [pow[0] * w, pow[0], pow[1]];
                a *= -1.0 / ((2.0 * kf + 2.0) * (2.0 * kf + 3.0));
            }
            [s0, s1, s2]
        } else {
            let r = w.sqrt();
            let s0 = r.sin() / r;
            let c0 = r.cos();
            let s1 = (c0 - s0) / (2.0 * w);
            let s2 = -s0 / (4.0 * w) - 1.5 * s1 / w;
            [s0, s1, s2]
        };
        let c0 = if w < 1.0 {
            let mut sum = 0.0;
            let mut term = 1.0;
            for k in 0..18u32 {
                sum += term;
                let kf = k as f64;
                term *= -w / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
            }
            sum
        } else {
            w.sqrt().cos()
        };
        Self {
            c: [c0, -0.5 * s[0], -0.5 * s[1]],
            s,
        }
    }
}

/// Azimuthal chart of a surface of revolution with profile
/// `ρ(σ) = R sin σ`, `z(σ) = H cos σ + D cos² σ` and boundary `b = H cos σ`.
///
/// Coordinates are `u = σ (cos φ, sin φ)`, so the chart is smooth at its
/// centre and degenerates only at the antipode `|u| = π`. With `H = R = ℓ`
/// and `D = 0` this is a sphere of radius ℓ whose upper half is `M`.
/// The antipodal chart of the same surface uses `H → −H`.
#[derive(Clone, Debug)]
pub struct RevolutionChart {
    name: String,
    radius: f64,
    height: f64,
    dimple: f64,
    max_sigma: f64,
    antipodal: bool,
}

impl RevolutionChart {
    /// Chart centred on the top of the surface (`σ = 0`), valid for `|u| < max_sigma`.
    pub fn pole(name: impl Into<String>, radius: f64, height: f64, dimple: f64, max_sigma: f64) -> Self {
        Self {
            name: name.into(),
            radius,
            height,
            dimple,
            max_sigma,
            antipodal: false,
        }
    }

    /// Chart centred on the antipode of the top; `M` is `|u| ≥ π/2` in it.
    pub fn antipode(name: impl Into<String>, radius: f64, height: f64, dimple: f64, max_sigma: f64) -> Self {
        Self {
            name: name.into(),
            radius,
            height: -height,
            dimple,
            max_sigma,
            antipodal: true,
        }
    }

    fn profile(&self, w: f64) -> (RadialTrig, [f64; 3], [f64; 3]) {
        let t = RadialTrig::new(w);
        let rho = [self.radius * t.s[0], self.radius * t.s[1], self.radius * t.s[2]];
        let (h, d) = (self.height, self.dimple);
        let z = [
            h * t.c[0] + d * t.c[0] * t.c[0],
            h * t.c[1] + 2.0 * d * t.c[0] * t.c[1],
            h * t.c[2] + 2.0 * d * (t.c[1] * t.c[1] + t.c[0] * t.c[2]),
        ];
        (t, rho, z)
    }

    fn z_of_sigma(&self, sigma: f64) -> f64 {
        let c = sigma.cos();
        self.height * c + self.dimple * c * c
    }
}

impl Chart for RevolutionChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        2
    }

    fn depth(&self, u: Coords) -> f64 {
        1.0 - u[0].hypot(u[1]) / self.max_sigma
    }

    fn diameter(&self) -> f64 {
        2.0 * self.max_sigma
    }

    fn position(&self, u: Coords) -> Vec3 {
        let w = u[0] * u[0] + u[1] * u[1];
        let (_, rho, z) = self.profile(w);
        Vec3::new(rho[0] * u[0], rho[0] * u[1], z[0])
    }

    fn partials(&self, u: Coords) -> [Vec3; 2] {
        let w = u[0] * u[0] + u[1] * u[1];
        let (_, rho, z) = self.profile(w);
        let mut out = [Vec3::zeros(); 2];
        for (i, d) in out.iter_mut().enumerate() {
            let mut v = Vec3::zeros();
            for a in 0..2 {
                v[a] = 2.0 * rho[1] * u[i] * u[a] + if a == i { rho[0] } else { 0.0 };
            }
            v[2] = 2.0 * z[1] * u[i];
            *d = v;
        }
        out
    }

    fn second_partials(&self, u: Coords) -> [[Vec3; 2]; 2] {
        let w = u[0] * u[0] + u[1] * u[1];
        let (_, rho, z) = self.profile(w);
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut out = [[Vec3::zeros(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = Vec3::zeros();
                for a in 0..2 {
                    v[a] = 4.0 * rho[2] * u[i] * u[j] * u[a]
                        + 2.0 * rho[1] * (delta(i, j) * u[a] + u[i] * delta(a, j) + u[j] * delta(a, i));
                }
                v[2] = 4.0 * z[2] * u[i] * u[j] + 2.0 * z[1] * delta(i, j);
                out[i][j] = v;
            }
        }
        out
    }

    fn boundary(&self, u: Coords) -> f64 {
        let t = RadialTrig::new(u[0] * u[0] + u[1] * u[1]);
        self.height * t.c[0]
    }

    fn boundary_gradient(&self, u: Coords) -> Coords {
        let t = RadialTrig::new(u[0] * u[0] + u[1] * u[1]);
        [2.0 * self.height * t.c[1] * u[0], 2.0 * self.height * t.c[1] * u[1]]
    }

    fn boundary_hessian(&self, u: Coords) -> [[f64; 2]; 2] {
        let t = RadialTrig::new(u[0] * u[0] + u[1] * u[1]);
        let h = self.height;
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = h * (4.0 * t.c[2] * u[i] * u[j] + if i == j { 2.0 * t.c[1] } else { 0.0 });
            }
        }
        out
    }

    fn initial_guess(&self, q: &Vec3) -> Coords {
        let rho = q.x.hypot(q.y);
        let phi = q.y.atan2(q.x);
        let s1 = (rho / self.radius).clamp(0.0, 1.0).asin();
        let s2 = PI - s1;
        let sigma = if (self.z_of_sigma(s1) - q.z).abs() <= (self.z_of_sigma(s2) - q.z).abs() {
            s1
        } else {
            s2
        };
        [sigma * phi.cos(), sigma * phi.sin()]
    }

    fn interior_point(&self, w: Coords) -> Coords {
        let phi = TAU * w[1];
        let sigma = if self.antipodal {
            FRAC_PI_2 + (self.max_sigma - FRAC_PI_2) * 0.9 * (1.0 - w[0])
        } else {
            0.95 * FRAC_PI_2 * w[0]
        };
        [sigma * phi.cos(), sigma * phi.sin()]
    }

    fn boundary_point(&self, s: f64) -> Option<Coords> {
        let phi = TAU * s;
        Some([FRAC_PI_2 * phi.cos(), FRAC_PI_2 * phi.sin()])
    }
}

/// Angle chart of a circle of radius ℓ in the `xz`-plane,
/// `r(θ) = ℓ (sin(θ + θ₀), 0, cos(θ + θ₀))`, with boundary `b = ℓ cos(θ + θ₀)`.
///
/// With `θ₀ = 0` the upper half-circle `|θ| ≤ π/2` is `M`.
#[derive(Clone, Debug)]
pub struct CircleChart {
    name: String,
    length: f64,
    offset: f64,
    max_angle: f64,
}

impl CircleChart {
    pub fn new(name: impl Into<String>, length: f64, offset: f64, max_angle: f64) -> Self {
        Self {
            name: name.into(),
            length,
            offset,
            max_angle,
        }
    }
}

impl Chart for CircleChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        1
    }

    fn depth(&self, u: Coords) -> f64 {
        1.0 - u[0].abs() / self.max_angle
    }

    fn diameter(&self) -> f64 {
        2.0 * self.max_angle
    }

    fn position(&self, u: Coords) -> Vec3 {
        let a = u[0] + self.offset;
        self.length * Vec3::new(a.sin(), 0.0, a.cos())
    }

    fn partials(&self, u: Coords) -> [Vec3; 2] {
        let a = u[0] + self.offset;
        [self.length * Vec3::new(a.cos(), 0.0, -a.sin()), Vec3::zeros()]
    }

    fn second_partials(&self, u: Coords) -> [[Vec3; 2]; 2] {
        let a = u[0] + self.offset;
        let mut out = [[Vec3::zeros(); 2]; 2];
        out[0][0] = -self.length * Vec3::new(a.sin(), 0.0, a.cos());
        out
    }

    fn boundary(&self, u: Coords) -> f64 {
        self.length * (u[0] + self.offset).cos()
    }

    fn boundary_gradient(&self, u: Coords) -> Coords {
        [-self.length * (u[0] + self.offset).sin(), 0.0]
    }

    fn boundary_hessian(&self, u: Coords) -> [[f64; 2]; 2] {
        [[-self.length * (u[0] + self.offset).cos(), 0.0], [0.0, 0.0]]
    }

    fn normal(&self, u: Coords) -> Vec3 {
        let a = u[0] + self.offset;
        Vec3::new(a.sin(), 0.0, a.cos())
    }

    fn initial_guess(&self, q: &Vec3) -> Coords {
        let a = q.x.atan2(q.z) - self.offset;
        [(a + PI).rem_euclid(TAU) - PI, 0.0]
    }

    fn interior_point(&self, w: Coords) -> Coords {
        [0.95 * FRAC_PI_2 * symmetric(w[0]), 0.0]
    }

    fn boundary_point(&self, s: f64) -> Option<Coords> {
        let theta = if s < 0.5 { FRAC_PI_2 } else { -FRAC_PI_2 };
        Some([theta - self.offset, 0.0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlaneRegion {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

/// Cartesian chart of the horizontal plane `z = 0` holding a flat disk or annulus.
#[derive(Clone, Debug)]
pub struct PlaneChart {
    name: String,
    region: PlaneRegion,
    margin: f64,
}

impl PlaneChart {
    pub fn new(name: impl Into<String>, region: PlaneRegion, margin: f64) -> Self {
        Self {
            name: name.into(),
            region,
            margin,
        }
    }

    fn radial(&self, s: f64) -> [f64; 3] {
        match self.region {
            PlaneRegion::Disk { radius } => [(radius * radius - s * s) / (2.0 * radius), -s / radius, -1.0 / radius],
            PlaneRegion::Annulus { inner, outer } => {
                let width = outer - inner;
                [
                    (s - inner) * (outer - s) / width,
                    (inner + outer - 2.0 * s) / width,
                    -2.0 / width,
                ]
            }
        }
    }
}

impl Chart for PlaneChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        2
    }

    fn depth(&self, u: Coords) -> f64 {
        let s = u[0].hypot(u[1]);
        match self.region {
            PlaneRegion::Disk { radius } => 1.0 - s / (radius + self.margin),
            PlaneRegion::Annulus { inner, outer } => {
                let lo = (inner - self.margin).max(0.0);
                let hi = outer + self.margin;
                ((s - lo).min(hi - s)) / (0.5 * (hi - lo))
            }
        }
    }

    fn diameter(&self) -> f64 {
        match self.region {
            PlaneRegion::Disk { radius } => 2.0 * (radius + self.margin),
            PlaneRegion::Annulus { outer, .. } => 2.0 * (outer + self.margin),
        }
    }

    fn position(&self, u: Coords) -> Vec3 {
        Vec3::new(u[0], u[1], 0.0)
    }

    fn partials(&self, _u: Coords) -> [Vec3; 2] {
        [Vec3::x(), Vec3::y()]
    }

    fn second_partials(&self, _u: Coords) -> [[Vec3; 2]; 2] {
        [[Vec3::zeros(); 2]; 2]
    }

    fn boundary(&self, u: Coords) -> f64 {
        self.radial(u[0].hypot(u[1]))[0]
    }

    fn boundary_gradient(&self, u: Coords) -> Coords {
        let s = u[0].hypot(u[1]);
        match self.region {
            PlaneRegion::Disk { radius } => [-u[0] / radius, -u[1] / radius],
            PlaneRegion::Annulus { .. } => {
                let d = self.radial(s)[1];
                [d * u[0] / s, d * u[1] / s]
            }
        }
    }

    fn boundary_hessian(&self, u: Coords) -> [[f64; 2]; 2] {
        let s = u[0].hypot(u[1]);
        match self.region {
            PlaneRegion::Disk { radius } => [[-1.0 / radius, 0.0], [0.0, -1.0 / radius]],
            PlaneRegion::Annulus { .. } => {
                let [_, d1, d2] = self.radial(s);
                let mut out = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let uu = u[i] * u[j] / (s * s);
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i][j] = d2 * uu + d1 * (id - uu) / s;
                    }
                }
                out
            }
        }
    }

    fn normal(&self, _u: Coords) -> Vec3 {
        Vec3::z()
    }

    fn initial_guess(&self, q: &Vec3) -> Coords {
        [q.x, q.y]
    }

    fn interior_point(&self, w: Coords) -> Coords {
        let phi = TAU * w[1];
        let s = match self.region {
            PlaneRegion::Disk { radius } => 0.95 * radius * w[0],
            PlaneRegion::Annulus { inner, outer } => {
                0.5 * (inner + outer) + 0.95 * 0.5 * (outer - inner) * symmetric(w[0])
            }
        };
        [s * phi.cos(), s * phi.sin()]
    }

    fn boundary_point(&self, s: f64) -> Option<Coords> {
        let (radius, angle) = match self.region {
            PlaneRegion::Disk { radius } => (radius, TAU * s),
            PlaneRegion::Annulus { inner, outer } => {
                if s < 0.5 {
                    (outer, 2.0 * TAU * s)
                } else {
                    (inner, 2.0 * TAU * (s - 0.5))
                }
            }
        };
        Some([radius * angle.cos(), radius * angle.sin()])
    }
}

type CoordFn<T> = Arc<dyn Fn(Coords) -> T + Send + Sync>;

/// User chart given by closures; all derivatives come from central differences.
#[derive(Clone)]
pub struct FnChart {
    name: String,
    dim: usize,
    diameter: f64,
    position: CoordFn<Vec3>,
    boundary: CoordFn<f64>,
    depth: CoordFn<f64>,
}

impl fmt::Debug for FnChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("diameter", &self.diameter)
            .finish_non_exhaustive()
    }
}

impl FnChart {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        diameter: f64,
        position: impl Fn(Coords) -> Vec3 + Send + Sync + 'static,
        boundary: impl Fn(Coords) -> f64 + Send + Sync + 'static,
        depth: impl Fn(Coords) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            diameter,
            position: Arc::new(position),
            boundary: Arc::new(boundary),
            depth: Arc::new(depth),
        }
    }
}

impl Chart for FnChart {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn depth(&self, u: Coords) -> f64 {
        (self.depth)(u)
    }

    fn diameter(&self) -> f64 {
        self.diameter
    }

    fn position(&self, u: Coords) -> Vec3 {
        (self.position)(u)
    }

    fn boundary(&self, u: Coords) -> f64 {
        (self.boundary)(u)
    }

    fn initial_guess(&self, _q: &Vec3) -> Coords {
        [0.0, 0.0]
    }

    fn interior_point(&self, w: Coords) -> Coords {
        let r = 0.25 * self.diameter * w[0];
        [r * (TAU * w[1]).cos(), r * (TAU * w[1]).sin()]
    }

    fn boundary_point(&self, _s: f64) -> Option<Coords> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_trig_matches_closed_forms() {
        for &w in &[0.0, 1e-6, 0.3, 0.99, 1.0, 1.01, 2.5, 4.0] {
            let t = RadialTrig::new(w);
            let r: f64 = w.sqrt();
            let s0 = if w == 0.0 { 1.0 } else { r.sin() / r };
            assert!((t.c[0] - r.cos()).abs() < 1e-14, "w = {w}");
            assert!((t.s[0] - s0).abs() < 1e-14, "w = {w}");
            // finite-difference derivatives in w
            if w > 1e-3 {
                let h = 1e-5;
                let (tp, tm) = (RadialTrig::new(w + h), RadialTrig::new(w - h));
                assert!(((tp.s[0] - tm.s[0]) / (2.0 * h) - t.s[1]).abs() < 1e-8, "w = {w}");
                assert!(((tp.s[1] - tm.s[1]) / (2.0 * h) - t.s[2]).abs() < 1e-8, "w = {w}");
                assert!(((tp.c[0] - tm.c[0]) / (2.0 * h) - t.c[1]).abs() < 1e-8, "w = {w}");
            }
        }
    }

    #[test]
    fn symmetric_map_starts_at_zero() {
        assert_eq!(symmetric(0.0), 0.0);
        assert_eq!(symmetric(0.5), -1.0);
        assert_eq!(symmetric(0.25), 0.5);
    }
}
