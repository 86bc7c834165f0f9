//! Charts, frames and topology of the constraint surface.
//!
//! The surface `M` is described by an atlas of charts `r(u)`, each valid
//! slightly beyond `M` so that trajectories may be evaluated a little past
//! the boundary. The boundary is the zero set of a signed function `b`
//! (positive inside `M`) that every chart evaluates in its own coordinates.
//! Topology never comes from the charts: it is read off a separate mesh.

mod charts;
mod mesh;

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use charts::{CircleChart, FnChart, PlaneChart, PlaneRegion, RevolutionChart};
pub use mesh::{exit_index, Mesh, MeshCounts};

pub type Vec3 = Vector3<f64>;

/// Chart coordinates. One-dimensional charts only use the first slot.
pub type Coords = [f64; 2];

/// Metric determinant below which a chart is treated as degenerate.
pub const IMMERSION_TOL: f64 = 1e-10;

/// Depth below which the integrator looks for a better chart.
pub const COMFORT_DEPTH: f64 = 0.2;

/// A local parametrization `u ↦ r(u)` of (a neighbourhood in) the enlarged surface.
///
/// Default derivative implementations use central differences; built-in
/// charts override them with closed forms.
pub trait Chart: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Intrinsic dimension, 1 (curve) or 2 (surface).
    fn dim(&self) -> usize;

    /// 1 at the chart centre, 0 on the edge of the validity set, negative outside.
    /// The comfort region is `depth >= COMFORT_DEPTH`.
    fn depth(&self, u: Coords) -> f64;

    /// Coordinate diameter of the validity set; sets the finite-difference step.
    fn diameter(&self) -> f64;

    fn position(&self, u: Coords) -> Vec3;

    fn partials(&self, u: Coords) -> [Vec3; 2] {
        let h = self.fd_step();
        let mut out = [Vec3::zeros(); 2];
        for (i, d) in out.iter_mut().enumerate().take(self.dim()) {
            let (up, dn) = shifted(u, i, h);
            *d = (self.position(up) - self.position(dn)) / (2.0 * h);
        }
        out
    }

    fn second_partials(&self, u: Coords) -> [[Vec3; 2]; 2] {
        let h = self.fd_step();
        let mut out = [[Vec3::zeros(); 2]; 2];
        for j in 0..self.dim() {
            let (up, dn) = shifted(u, j, h);
            let (pu, pd) = (self.partials(up), self.partials(dn));
            for i in 0..self.dim() {
                out[i][j] = (pu[i] - pd[i]) / (2.0 * h);
            }
        }
        symmetrize_vec(&mut out);
        out
    }

    /// Signed boundary function, positive in the interior of `M`.
    fn boundary(&self, u: Coords) -> f64;

    fn boundary_gradient(&self, u: Coords) -> Coords {
        let h = self.fd_step();
        let mut out = [0.0; 2];
        for (i, d) in out.iter_mut().enumerate().take(self.dim()) {
            let (up, dn) = shifted(u, i, h);
            *d = (self.boundary(up) - self.boundary(dn)) / (2.0 * h);
        }
        out
    }

    fn boundary_hessian(&self, u: Coords) -> [[f64; 2]; 2] {
        let h = self.fd_step();
        let mut out = [[0.0; 2]; 2];
        for j in 0..self.dim() {
            let (up, dn) = shifted(u, j, h);
            let (gu, gd) = (self.boundary_gradient(up), self.boundary_gradient(dn));
            for i in 0..self.dim() {
                out[i][j] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        let off = 0.5 * (out[0][1] + out[1][0]);
        out[0][1] = off;
        out[1][0] = off;
        out
    }

    /// Unit normal. For curves this is the in-plane principal normal.
    fn normal(&self, u: Coords) -> Vec3 {
        let d = self.partials(u);
        d[0].cross(&d[1]).normalize()
    }

    /// Rough chart coordinates of an embedded point, refined by [`invert`].
    fn initial_guess(&self, q: &Vec3) -> Coords;

    /// Maps `w ∈ [0,1)²` onto the part of `M` covered by this chart; `w = 0` is the chart centre.
    fn interior_point(&self, w: Coords) -> Coords;

    /// Maps `s ∈ [0,1)` onto `∂M`, or `None` when the chart holds no boundary.
    fn boundary_point(&self, s: f64) -> Option<Coords>;

    fn fd_step(&self) -> f64 {
        1e-5 * self.diameter()
    }
}

fn shifted(u: Coords, i: usize, h: f64) -> (Coords, Coords) {
    let mut up = u;
    let mut dn = u;
    up[i] += h;
    dn[i] -= h;
    (up, dn)
}

fn symmetrize_vec(m: &mut [[Vec3; 2]; 2]) {
    let off = 0.5 * (m[0][1] + m[1][0]);
    m[0][1] = off;
    m[1][0] = off;
}

fn domain_error(chart: &dyn Chart, u: Coords) -> Error {
    Error::Domain {
        chart: chart.name().to_string(),
        u0: u[0],
        u1: u[1],
    }
}

fn check_domain(chart: &dyn Chart, u: Coords) -> Result<()> {
    let depth = chart.depth(u);
    if depth > 0.0 && u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(domain_error(chart, u))
    }
}

/// `r(u)` for `u` inside the chart's validity set.
pub fn embed(chart: &dyn Chart, u: Coords) -> Result<Vec3> {
    check_domain(chart, u)?;
    Ok(chart.position(u))
}

pub type Metric = [[f64; 2]; 2];

/// Christoffel symbols of the second kind, indexed `[k][i][j]` for Γᵏᵢⱼ.
pub type Christoffel = [[[f64; 2]; 2]; 2];

/// Everything the equations of motion need at one chart point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub dim: usize,
    pub point: Vec3,
    pub partials: [Vec3; 2],
    pub second: [[Vec3; 2]; 2],
    pub metric: Metric,
    pub inverse_metric: Metric,
}

impl LocalGeometry {
    pub fn at(chart: &dyn Chart, u: Coords) -> Result<Self> {
        check_domain(chart, u)?;
        let dim = chart.dim();
        let partials = chart.partials(u);
        let second = chart.second_partials(u);
        let mut metric = [[0.0; 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                metric[i][j] = partials[i].dot(&partials[j]);
            }
        }
        let det = if dim == 1 {
            metric[0][0]
        } else {
            metric[0][0] * metric[1][1] - metric[0][1] * metric[1][0]
        };
        if !(det > IMMERSION_TOL) {
            return Err(Error::DegenerateChart {
                chart: chart.name().to_string(),
                u0: u[0],
                u1: u[1],
                det,
            });
        }
        let inverse_metric = if dim == 1 {
            [[1.0 / det, 0.0], [0.0, 0.0]]
        } else {
            [
                [metric[1][1] / det, -metric[0][1] / det],
                [-metric[1][0] / det, metric[0][0] / det],
            ]
        };
        Ok(Self {
            dim,
            point: chart.position(u),
            partials,
            second,
            metric,
            inverse_metric,
        })
    }

    pub fn christoffel(&self) -> Christoffel {
        let n = self.dim;
        let mut lowered = [[[0.0; 2]; 2]; 2];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = self.second[i][j].dot(&self.partials[l]);
                    lowered[l][i][j] = v;
                    lowered[l][j][i] = v;
                }
            }
        }
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n)
                        .map(|l| self.inverse_metric[k][l] * lowered[l][i][j])
                        .sum();
                    gamma[k][i][j] = v;
                    gamma[k][j][i] = v;
                }
            }
        }
        gamma
    }

    /// Embedded velocity `ṙ = ∂ᵢr u̇ⁱ`.
    pub fn velocity(&self, v: Coords) -> Vec3 {
        (0..self.dim).fold(Vec3::zeros(), |acc, i| acc + self.partials[i] * v[i])
    }

    /// Components `f·∂ₗr` of an ambient force.
    pub fn lower(&self, f: &Vec3) -> Coords {
        let mut out = [0.0; 2];
        for (l, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = f.dot(&self.partials[l]);
        }
        out
    }

    pub fn raise(&self, w: Coords) -> Coords {
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|l| self.inverse_metric[k][l] * w[l]).sum();
        }
        out
    }

    /// Chart velocity of the tangential part of an ambient vector.
    pub fn project_velocity(&self, p: &Vec3) -> Coords {
        self.raise(self.lower(p))
    }

    /// Embedded acceleration `r̈ = ∂ᵢr üⁱ + ∂ᵢ∂ⱼr u̇ⁱu̇ʲ`.
    pub fn acceleration(&self, v: Coords, a: Coords) -> Vec3 {
        let mut out = self.velocity(a);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out += self.second[i][j] * (v[i] * v[j]);
            }
        }
        out
    }

    pub fn speed_squared(&self, v: Coords) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.metric[i][j] * v[i] * v[j];
            }
        }
        s
    }
}

/// Metric tensor and Christoffel symbols at `u`.
pub fn metric_and_christoffel(chart: &dyn Chart, u: Coords) -> Result<(Metric, Christoffel)> {
    let geo = LocalGeometry::at(chart, u)?;
    Ok((geo.metric, geo.christoffel()))
}

/// Boundary tolerance for [`boundary_frame`].
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Point, surface normal and (at boundary points) the outward in-surface normal.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub point: Vec3,
    pub normal: Vec3,
    pub outward: Option<Vec3>,
}

/// Unit in-surface vector pointing towards decreasing `b`, i.e. out of `M`.
pub fn outward_normal(chart: &dyn Chart, geo: &LocalGeometry, u: Coords) -> Result<Vec3> {
    let grad = chart.boundary_gradient(u);
    let direction = geo.velocity(geo.raise(grad));
    let norm = direction.norm();
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::IrregularBoundary {
            chart: chart.name().to_string(),
            u0: u[0],
            u1: u[1],
        });
    }
    Ok(-direction / norm)
}

pub fn boundary_frame(chart: &dyn Chart, u: Coords) -> Result<TangentFrame> {
    check_domain(chart, u)?;
    let b = chart.boundary(u);
    if b.abs() >= BOUNDARY_TOL {
        return Err(Error::NotOnBoundary { b });
    }
    let geo = LocalGeometry::at(chart, u)?;
    let outward = outward_normal(chart, &geo, u)?;
    Ok(TangentFrame {
        point: geo.point,
        normal: chart.normal(u),
        outward: Some(outward),
    })
}

/// Frame at an arbitrary point; `outward` is only filled in on `∂M`.
pub fn frame(chart: &dyn Chart, u: Coords) -> Result<TangentFrame> {
    match boundary_frame(chart, u) {
        Err(Error::NotOnBoundary { .. }) => Ok(TangentFrame {
            point: embed(chart, u)?,
            normal: chart.normal(u),
            outward: None,
        }),
        other => other,
    }
}

/// Unit chart-coordinate tangent of `∂M` at a 2-d boundary point, scaled to unit embedded speed.
pub fn boundary_tangent(chart: &dyn Chart, u: Coords) -> Result<Coords> {
    if chart.dim() < 2 {
        return Ok([0.0, 0.0]);
    }
    let geo = LocalGeometry::at(chart, u)?;
    let g = chart.boundary_gradient(u);
    let t = [-g[1], g[0]];
    let speed = geo.speed_squared(t).sqrt();
    if !(speed > 0.0) {
        return Err(Error::IrregularBoundary {
            chart: chart.name().to_string(),
            u0: u[0],
            u1: u[1],
        });
    }
    Ok([t[0] / speed, t[1] / speed])
}

/// Nearest-point chart inversion by Gauss–Newton, started from `guess` or the chart's own estimate.
///
/// Returns the coordinates and the remaining distance `‖r(u) − q‖`.
pub fn invert(chart: &dyn Chart, q: &Vec3, guess: Option<Coords>) -> Result<(Coords, f64)> {
    let mut u = guess.unwrap_or_else(|| chart.initial_guess(q));
    for _ in 0..60 {
        let geo = LocalGeometry::at(chart, u)?;
        let delta = geo.project_velocity(&(q - geo.point));
        let mut next = u;
        for i in 0..chart.dim() {
            next[i] += delta[i];
        }
        u = next;
        if delta.iter().map(|d| d * d).sum::<f64>().sqrt() < 1e-15 {
            break;
        }
    }
    let distance = (embed(chart, u)? - q).norm();
    Ok((u, distance))
}

/// The compact surface `M` together with its atlas and an optional mesh for topology.
///
/// Chart 0 is the home chart: it covers all of `M` and is where sampling,
/// seeding and Poincaré-map defects live.
#[derive(Clone, Debug)]
pub struct Surface {
    pub name: String,
    pub charts: Vec<Arc<dyn Chart>>,
    pub mesh: Option<Mesh>,
}

impl Surface {
    pub fn new(name: impl Into<String>, charts: Vec<Arc<dyn Chart>>, mesh: Option<Mesh>) -> Self {
        assert!(!charts.is_empty(), "a surface needs at least one chart");
        Self {
            name: name.into(),
            charts,
            mesh,
        }
    }

    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    pub fn chart(&self, index: usize) -> &dyn Chart {
        self.charts[index].as_ref()
    }

    pub fn home(&self) -> &dyn Chart {
        self.chart(0)
    }

    /// Chart whose comfort depth at `q` is largest, with the coordinates of `q` in it.
    pub fn best_chart(&self, q: &Vec3, current: Option<(usize, Coords)>) -> Option<(usize, Coords)> {
        self.best_chart_within(q, current, 1e-9 * (1.0 + q.norm()))
    }

    /// As [`Surface::best_chart`], for a point up to `distance_tol` off the surface.
    pub fn best_chart_within(
        &self,
        q: &Vec3,
        current: Option<(usize, Coords)>,
        distance_tol: f64,
    ) -> Option<(usize, Coords)> {
        let mut best: Option<(usize, Coords, f64)> = None;
        for (index, chart) in self.charts.iter().enumerate() {
            let guess = match current {
                Some((c, u)) if c == index => Some(u),
                _ => None,
            };
            let Ok((u, distance)) = invert(chart.as_ref(), q, guess) else {
                continue;
            };
            if distance > distance_tol {
                continue;
            }
            let depth = chart.depth(u);
            if depth <= 0.0 {
                continue;
            }
            if best.is_none_or(|(_, _, d)| depth > d) {
                best = Some((index, u, depth));
            }
        }
        best.map(|(i, u, _)| (i, u))
    }
}
