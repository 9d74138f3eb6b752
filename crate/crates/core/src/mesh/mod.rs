//! Oriented triangle meshes approximating a surface.

mod generate;
mod io;

use std::collections::HashMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use generate::{hyperboloid, hyperboloid_grid_shape, icosphere, MAX_LEVEL};
pub use io::{load_obj, load_off, read_obj, read_off, save_off, write_off};

/// Triangles whose area falls below this fraction of the mean are degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("refinement level {level} exceeds the cap {cap}")]
    LevelCap { level: u32, cap: u32 },
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    DanglingIndex {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("face {face} has {count} vertices, only triangles are supported")]
    NonTriangleFace { face: usize, count: usize },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Vertices in ambient 3-space plus counter-clockwise (w.r.t. the outward
/// normal) vertex-index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

/// Where a point lands on the mesh: the closest triangle and the
/// barycentric coordinates of the closest point inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub barycentric: [f64; 3],
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// Triangles that repeat a vertex index.
    pub repeated_vertices: Vec<usize>,
    pub degenerate_triangles: Vec<usize>,
    /// Edges used by a single triangle.
    pub boundary_edges: Vec<(usize, usize)>,
    /// Edges used by more than two triangles.
    pub nonmanifold_edges: Vec<(usize, usize)>,
    /// Interior edges traversed in the same direction by both triangles.
    pub orientation_conflicts: Vec<(usize, usize)>,
    pub unreferenced_vertices: Vec<usize>,
}

impl ValidationReport {
    /// Manifold, consistently oriented, non-degenerate; boundary allowed.
    pub fn is_valid(&self) -> bool {
        self.repeated_vertices.is_empty()
            && self.degenerate_triangles.is_empty()
            && self.nonmanifold_edges.is_empty()
            && self.orientation_conflicts.is_empty()
            && self.unreferenced_vertices.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.is_valid() && self.boundary_edges.is_empty()
    }

    pub fn check(&self, require_closed: bool) -> Result<(), MeshError> {
        let mut problems = Vec::new();
        let mut note = |label: &str, count: usize| {
            if count > 0 {
                problems.push(format!("{count} {label}"));
            }
        };
        note("triangles with repeated vertices", self.repeated_vertices.len());
        note("degenerate triangles", self.degenerate_triangles.len());
        note("non-manifold edges", self.nonmanifold_edges.len());
        note("orientation conflicts", self.orientation_conflicts.len());
        note("unreferenced vertices", self.unreferenced_vertices.len());
        if require_closed {
            note("open edges", self.boundary_edges.len());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MeshError::Invalid(problems.join(", ")))
        }
    }
}

impl TriangleMesh {
    /// Builds a mesh after checking that every index is in range.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let vertex_count = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= vertex_count) {
                return Err(MeshError::DanglingIndex {
                    triangle: t,
                    index,
                    vertex_count,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted normal: half the cross product of two edges.
    pub fn triangle_vector_area(&self, t: usize) -> Vec3 {
        let [p0, p1, p2] = self.corners(t);
        let n = cross(sub(p1, p0), sub(p2, p0));
        [0.5 * n[0], 0.5 * n[1], 0.5 * n[2]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        norm(self.triangle_vector_area(t))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * factor, v[1] * factor, v[2] * factor])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Undirected edges as sorted pairs, each listed once.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Sorted neighbour lists (excluding the vertex itself).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (u, v) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            vertex_count: self.vertices.len(),
            triangle_count: self.triangles.len(),
            ..Default::default()
        };
        let areas: Vec<f64> = (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .collect();
        let mean = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
        let mut used = vec![false; self.vertices.len()];
        // directed edge -> count, keyed by the undirected pair
        let mut edge_use: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            if a == b || b == c || c == a {
                report.repeated_vertices.push(t);
            }
            if !(areas[t] >= DEGENERATE_AREA_RATIO * mean) {
                report.degenerate_triangles.push(t);
            }
            for v in [a, b, c] {
                used[v] = true;
            }
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let entry = edge_use.entry((u.min(v), u.max(v))).or_default();
                if u < v {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
        let mut edges: Vec<_> = edge_use.into_iter().collect();
        edges.sort_unstable();
        for (edge, (forward, backward)) in edges {
            match forward + backward {
                1 => report.boundary_edges.push(edge),
                2 if forward == 1 => {}
                2 => report.orientation_conflicts.push(edge),
                _ => report.nonmanifold_edges.push(edge),
            }
        }
        report.unreferenced_vertices = used
            .iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(i, _)| i)
            .collect();
        report
    }

    /// Closest point of the mesh to `p` (brute force over triangles).
    pub fn locate(&self, p: Vec3) -> Location {
        let mut best = Location {
            triangle: 0,
            barycentric: [1.0, 0.0, 0.0],
            distance: f64::INFINITY,
        };
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let bary = closest_point_barycentric(p, a, b, c);
            let q = [
                bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
                bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
                bary[0] * a[2] + bary[1] * b[2] + bary[2] * c[2],
            ];
            let d = norm(sub(p, q));
            if d < best.distance {
                best = Location {
                    triangle: t,
                    barycentric: bary,
                    distance: d,
                };
            }
        }
        best
    }

    /// Hat-function values at the closest mesh point to `p`, as
    /// `(vertex, weight)` pairs.
    pub fn interpolation_weights(&self, p: Vec3) -> [(usize, f64); 3] {
        let loc = self.locate(p);
        let tri = self.triangles[loc.triangle];
        [
            (tri[0], loc.barycentric[0]),
            (tri[1], loc.barycentric[1]),
            (tri[2], loc.barycentric[2]),
        ]
    }

    /// SHA-256 of the coordinate bits and connectivity, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for x in v {
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
        hasher.update((self.triangles.len() as u64).to_le_bytes());
        for tri in &self.triangles {
            for &i in tri {
                hasher.update((i as u64).to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Barycentric coordinates of the point of triangle `abc` closest to `p`.
fn closest_point_barycentric(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> [f64; 3] {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}
