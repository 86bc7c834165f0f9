//! Triangulated (or polyline) meshes used only for topology.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// A 2-complex of triangles, or a 1-complex of segments when `faces` is empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub segments: Vec<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MeshCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    /// Closed boundary loops of a surface mesh, or end points of a curve mesh.
    pub boundary_components: usize,
}

impl Mesh {
    /// Parses the face-vertex text format: `v x y z`, `f i j k` (1-indexed),
    /// plus `l i j` segments for curve meshes. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut mesh = Mesh::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            let bad = |what: &str| Error::InvalidMesh(format!("line {}: {what}: `{raw}`", lineno + 1));
            match tag {
                "v" => {
                    if rest.len() < 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    let mut v = [0.0; 3];
                    for (slot, s) in v.iter_mut().zip(&rest) {
                        *slot = s.parse().map_err(|_| bad("bad coordinate"))?;
                    }
                    mesh.vertices.push(v);
                }
                "f" | "l" => {
                    let want = if tag == "f" { 3 } else { 2 };
                    if rest.len() != want {
                        return Err(bad(if tag == "f" {
                            "faces must be triangles"
                        } else {
                            "segments take two vertices"
                        }));
                    }
                    let mut idx = [0usize; 3];
                    for (slot, s) in idx.iter_mut().zip(&rest) {
                        // allow `i/vt/vn` references
                        let head = s.split('/').next().unwrap_or("");
                        let i: usize = head.parse().map_err(|_| bad("bad vertex index"))?;
                        if i == 0 {
                            return Err(bad("indices are 1-based"));
                        }
                        *slot = i - 1;
                    }
                    if tag == "f" {
                        mesh.faces.push(idx);
                    } else {
                        mesh.segments.push([idx[0], idx[1]]);
                    }
                }
                "vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib" => {}
                _ => return Err(bad("unknown record")),
            }
        }
        mesh.check_indices()?;
        Ok(mesh)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        for s in &self.segments {
            let _ = writeln!(out, "l {} {}", s[0] + 1, s[1] + 1);
        }
        out
    }

    fn check_indices(&self) -> Result<()> {
        let n = self.vertices.len();
        let faces = self.faces.iter().flat_map(|f| f.iter());
        let segs = self.segments.iter().flat_map(|s| s.iter());
        if let Some(bad) = faces.chain(segs).find(|&&i| i >= n) {
            return Err(Error::InvalidMesh(format!(
                "vertex index {} out of range ({n} vertices)",
                bad + 1
            )));
        }
        for f in &self.faces {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("degenerate face {:?}", f.map(|i| i + 1))));
            }
        }
        if !self.faces.is_empty() && !self.segments.is_empty() {
            return Err(Error::InvalidMesh("mixed face and segment records".into()));
        }
        Ok(())
    }

    fn edge_face_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Vertex, edge and face counts, `χ = V − E + F`, and boundary components.
    pub fn counts(&self) -> Result<MeshCounts> {
        self.check_indices()?;
        let vertices = self.vertices.len();
        if self.faces.is_empty() {
            // curve: every vertex has degree ≤ 2; end points form the boundary
            let mut degree = vec![0usize; vertices];
            let mut edges = BTreeSet::new();
            for s in &self.segments {
                if s[0] == s[1] || !edges.insert((s[0].min(s[1]), s[0].max(s[1]))) {
                    return Err(Error::InvalidMesh(format!("repeated segment {:?}", s.map(|i| i + 1))));
                }
                degree[s[0]] += 1;
                degree[s[1]] += 1;
            }
            if let Some(v) = degree.iter().position(|&d| d > 2) {
                return Err(Error::InvalidMesh(format!("vertex {} has more than two segments", v + 1)));
            }
            let ends = degree.iter().filter(|&&d| d == 1).count();
            return Ok(MeshCounts {
                vertices,
                edges: edges.len(),
                faces: 0,
                euler_characteristic: vertices as i64 - edges.len() as i64,
                boundary_components: ends,
            });
        }

        let edges = self.edge_face_counts();
        if let Some((&(a, b), &n)) = edges.iter().find(|(_, &n)| n > 2) {
            return Err(Error::InvalidMesh(format!(
                "non-manifold edge ({}, {}) bounds {n} faces",
                a + 1,
                b + 1
            )));
        }
        let boundary: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(_, &n)| n == 1)
            .map(|(&e, _)| e)
            .collect();
        let loops = count_loops(&boundary)?;
        Ok(MeshCounts {
            vertices,
            edges: edges.len(),
            faces: self.faces.len(),
            euler_characteristic: vertices as i64 - edges.len() as i64 + self.faces.len() as i64,
            boundary_components: loops,
        })
    }

    pub fn euler_characteristic(&self) -> Result<i64> {
        Ok(self.counts()?.euler_characteristic)
    }

    /// Regular octahedron, a triangulated sphere.
    pub fn octahedron() -> Self {
        let vertices = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let faces = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        Self {
            vertices,
            faces,
            segments: vec![],
        }
    }

    /// Disk-like cap: a centre vertex and `rings` rings of `sectors` vertices,
    /// placed by `place(t, phi)` with `t ∈ (0, 1]` the ring fraction.
    pub fn polar_cap(rings: usize, sectors: usize, place: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        assert!(rings >= 1 && sectors >= 3);
        let mut vertices = vec![place(0.0, 0.0)];
        for r in 1..=rings {
            for s in 0..sectors {
                vertices.push(place(r as f64 / rings as f64, TAU * s as f64 / sectors as f64));
            }
        }
        let ring = |r: usize, s: usize| 1 + (r - 1) * sectors + s % sectors;
        let mut faces = Vec::new();
        for s in 0..sectors {
            faces.push([0, ring(1, s), ring(1, s + 1)]);
        }
        for r in 1..rings {
            for s in 0..sectors {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                faces.push([a, c, d]);
                faces.push([a, d, b]);
            }
        }
        Self {
            vertices,
            faces,
            segments: vec![],
        }
    }

    /// Flat annulus between radii `inner < outer`.
    pub fn annulus(rings: usize, sectors: usize, inner: f64, outer: f64) -> Self {
        assert!(rings >= 1 && sectors >= 3);
        let mut vertices = Vec::new();
        for r in 0..=rings {
            let rad = inner + (outer - inner) * r as f64 / rings as f64;
            for s in 0..sectors {
                let a = TAU * s as f64 / sectors as f64;
                vertices.push([rad * a.cos(), rad * a.sin(), 0.0]);
            }
        }
        let idx = |r: usize, s: usize| r * sectors + s % sectors;
        let mut faces = Vec::new();
        for r in 0..rings {
            for s in 0..sectors {
                faces.push([idx(r, s), idx(r + 1, s), idx(r + 1, s + 1)]);
                faces.push([idx(r, s), idx(r + 1, s + 1), idx(r, s + 1)]);
            }
        }
        Self {
            vertices,
            faces,
            segments: vec![],
        }
    }

    /// Torus of revolution, `n × m` quads split into triangles.
    pub fn torus(n: usize, m: usize, major: f64, minor: f64) -> Self {
        assert!(n >= 3 && m >= 3);
        let mut vertices = Vec::new();
        for i in 0..n {
            let a = TAU * i as f64 / n as f64;
            for j in 0..m {
                let b = TAU * j as f64 / m as f64;
                let rad = major + minor * b.cos();
                vertices.push([rad * a.cos(), rad * a.sin(), minor * b.sin()]);
            }
        }
        let idx = |i: usize, j: usize| (i % n) * m + j % m;
        let mut faces = Vec::new();
        for i in 0..n {
            for j in 0..m {
                faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        Self {
            vertices,
            faces,
            segments: vec![],
        }
    }

    /// Open polyline through `samples + 1` points `place(t)`, `t ∈ [0, 1]`.
    pub fn arc(samples: usize, place: impl Fn(f64) -> [f64; 3]) -> Self {
        assert!(samples >= 1);
        let vertices = (0..=samples).map(|k| place(k as f64 / samples as f64)).collect();
        let segments = (0..samples).map(|k| [k, k + 1]).collect();
        Self {
            vertices,
            faces: vec![],
            segments,
        }
    }
}

fn count_loops(boundary: &[(usize, usize)]) -> Result<usize> {
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in boundary {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    if let Some((v, n)) = adjacency.iter().find(|(_, n)| n.len() != 2) {
        return Err(Error::InvalidMesh(format!(
            "boundary vertex {} has {} boundary edges; boundary edges must form closed loops",
            v + 1,
            n.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut loops = 0;
    for &start in adjacency.keys() {
        if !seen.insert(start) {
            continue;
        }
        loops += 1;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[&v] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    Ok(loops)
}

/// Fixed-point index `χ(W₀) − χ(W₀⁻)` of the time-T map on the energy block over `M`.
///
/// `W₀` retracts onto `M`. Over each boundary point the exit fibre
/// `{‖p‖² ≤ 2c, (ν, p) ≥ 0}` is contractible, so `W₀⁻` is homotopic to `∂M`:
/// a union of circles (χ = 0) for a surface, or of isolated end points
/// (χ = 1 each) for a curve.
pub fn exit_index(mesh: &Mesh, boundary_loop_count: usize) -> Result<i64> {
    let counts = mesh.counts()?;
    if counts.boundary_components != boundary_loop_count {
        return Err(Error::InvalidMesh(format!(
            "mesh has {} boundary components, {} declared",
            counts.boundary_components, boundary_loop_count
        )));
    }
    let exit_chi = if mesh.faces.is_empty() {
        counts.boundary_components as i64
    } else {
        0
    };
    Ok(counts.euler_characteristic - exit_chi)
}
