use std::collections::HashMap;

use super::{cross, dot, norm, sub, MeshError, TriangleMesh, Vec3};

/// Practical cap on refinement levels for the built-in generators.
pub const MAX_LEVEL: u32 = 8;

fn check_level(level: u32) -> Result<(), MeshError> {
    if level > MAX_LEVEL {
        Err(MeshError::LevelCap {
            level,
            cap: MAX_LEVEL,
        })
    } else {
        Ok(())
    }
}

fn normalized(v: Vec3) -> Vec3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Unit icosphere: a regular icosahedron subdivided `level` times (each
/// triangle into four), new vertices projected radially onto the sphere.
///
/// `10·4^level + 2` vertices and `20·4^level` triangles. The 12 icosahedron
/// vertices keep indices `0..12` at every level.
pub fn icosphere(level: u32) -> Result<TriangleMesh, MeshError> {
    check_level(level)?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalized)
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for tri in &mut triangles {
        let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let centroid = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
        if dot(cross(sub(b, a), sub(c, a)), centroid) < 0.0 {
            tri.swap(1, 2);
        }
    }

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |i: usize, j: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((i.min(j), i.max(j))).or_insert_with(|| {
                let (a, b) = (vertices[i], vertices[j]);
                vertices.push(normalized([a[0] + b[0], a[1] + b[1], a[2] + b[2]]));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = refined;
    }
    TriangleMesh::new(vertices, triangles)
}

/// `(angular, axial)` vertex counts of [`hyperboloid`] at `level`:
/// `(2^{level+4}, 2^{level+3} + 1)`.
pub fn hyperboloid_grid_shape(level: u32) -> (usize, usize) {
    (1usize << (level + 4), (1usize << (level + 3)) + 1)
}

/// The one-sheet hyperboloid `x² + y² − z² = 1`, `z ∈ [−2, 2]`, on a
/// structured `(φ, z)` grid. Vertex `(i, j)` (axial `i`, angular `j`) sits at
/// `(√(1+z_i²) cos φ_j, √(1+z_i²) sin φ_j, z_i)` and has index `i·n_φ + j`.
///
/// Quads split along opposite diagonals in the two halves `z < 0` and
/// `z > 0`, so the triangulation is symmetric under `z ↦ −z`. The surface
/// has two boundary rings at `z = ±2`.
pub fn hyperboloid(level: u32) -> Result<TriangleMesh, MeshError> {
    check_level(level)?;
    let (n_phi, n_z) = hyperboloid_grid_shape(level);
    let mut vertices = Vec::with_capacity(n_phi * n_z);
    for i in 0..n_z {
        // exact at both ends and at z = 0
        let z = -2.0 + 4.0 * i as f64 / (n_z - 1) as f64;
        let r = (1.0 + z * z).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            vertices.push([r * phi.cos(), r * phi.sin(), z]);
        }
    }
    let index = |i: usize, j: usize| i * n_phi + (j % n_phi);
    let half = (n_z - 1) / 2;
    let mut triangles = Vec::with_capacity(2 * n_phi * (n_z - 1));
    for i in 0..n_z - 1 {
        for j in 0..n_phi {
            let (v00, v01, v11, v10) = (index(i, j), index(i, j + 1), index(i + 1, j + 1), index(i + 1, j));
            if i < half {
                triangles.push([v00, v01, v11]);
                triangles.push([v00, v11, v10]);
            } else {
                triangles.push([v00, v01, v10]);
                triangles.push([v01, v11, v10]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn icosphere_counts() {
        let m = icosphere(0).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (12, 20));
        let m = icosphere(2).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (162, 320));
        assert!(icosphere(MAX_LEVEL + 1).is_err());
    }

    #[test]
    fn icosphere_invariants() {
        let mut prev_area = 0.0;
        for level in 0..=5 {
            let m = icosphere(level).unwrap();
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            let report = m.validate();
            assert!(report.is_closed(), "level {level}: {report:?}");
            for v in m.vertices() {
                assert!((norm(*v) - 1.0).abs() < 1e-14);
            }
            let area = m.surface_area();
            assert!(area <= 4.0 * PI);
            assert!(area > prev_area);
            prev_area = area;
            for t in 0..m.triangle_count() {
                let [a, b, c] = m.corners(t);
                let centroid = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
                assert!(dot(m.triangle_vector_area(t), centroid) > 0.0);
            }
        }
    }

    #[test]
    fn icosahedron_area() {
        let edge = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        let expected = 5.0 * 3f64.sqrt() * edge * edge;
        let area = icosphere(0).unwrap().surface_area();
        assert!((area - expected).abs() < 1e-12);
        assert!((area - 9.5746).abs() < 1e-4);
    }

    #[test]
    fn icosphere_area_converges_quadratically() {
        let deficit = |level| (4.0 * PI - icosphere(level).unwrap().surface_area()) / (4.0 * PI);
        // level 4 misses 4π by 0.1195%; level 5 is the first within 0.1%
        assert!(deficit(4) < 1.25e-3);
        assert!(deficit(5) < 1e-3);
        for level in 2..6 {
            let ratio = deficit(level) / deficit(level + 1);
            assert!((ratio - 4.0).abs() < 0.05, "level {level}: {ratio}");
        }
    }

    #[test]
    fn hyperboloid_geometry() {
        for level in 0..=2 {
            let m = hyperboloid(level).unwrap();
            let (n_phi, n_z) = hyperboloid_grid_shape(level);
            assert_eq!((n_phi, n_z), (1 << (level + 4), (1 << (level + 3)) + 1));
            assert_eq!(m.vertex_count(), n_phi * n_z);
            let mut zmin = f64::INFINITY;
            let mut zmax = f64::NEG_INFINITY;
            for v in m.vertices() {
                assert!((v[0] * v[0] + v[1] * v[1] - v[2] * v[2] - 1.0).abs() <= 1e-12);
                zmin = zmin.min(v[2]);
                zmax = zmax.max(v[2]);
            }
            assert_eq!((zmin, zmax), (-2.0, 2.0));
            let report = m.validate();
            assert!(report.is_valid(), "{report:?}");
            assert_eq!(report.boundary_edges.len(), 2 * n_phi);
            // annulus
            assert_eq!(m.euler_characteristic(), 0);
            for t in 0..m.triangle_count() {
                let [a, b, c] = m.corners(t);
                let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0];
                let outward = [centroid[0], centroid[1], -centroid[2]];
                assert!(dot(m.triangle_vector_area(t), outward) > 0.0);
            }
        }
    }

    #[test]
    fn hyperboloid_reflection_symmetric() {
        let m = hyperboloid(1).unwrap();
        let (n_phi, n_z) = hyperboloid_grid_shape(1);
        let reflect = |v: usize| (n_z - 1 - v / n_phi) * n_phi + v % n_phi;
        let mut original: Vec<[usize; 3]> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort_unstable();
                s
            })
            .collect();
        let mut mirrored: Vec<[usize; 3]> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut s = t.map(reflect);
                s.sort_unstable();
                s
            })
            .collect();
        original.sort_unstable();
        mirrored.sort_unstable();
        assert_eq!(original, mirrored);
    }
}
