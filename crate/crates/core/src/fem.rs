//! Linear (hat-function) finite elements on triangle meshes: mass matrix
//! `C`, stiffness matrix `R` and the lumped mass `Ĉ`.

use thiserror::Error;

use crate::mesh::{cross, dot, norm, sub, TriangleMesh, Vec3, DEGENERATE_AREA_RATIO};
use crate::sparse::SparseSymMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("mesh has no triangles")]
    Empty,
}

/// `∫_T ψ_i ψ_j = (A/12)(1 + δ_ij)`.
pub fn local_mass(corners: [Vec3; 3]) -> [[f64; 3]; 3] {
    let a = 0.5 * norm(cross(sub(corners[1], corners[0]), sub(corners[2], corners[0])));
    let mut m = [[a / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = a / 6.0;
    }
    m
}

/// `∫_T ∇ψ_i·∇ψ_j = (e_i·e_j)/(4A)`, with `e_i` the edge opposite vertex `i`.
pub fn local_stiffness(corners: [Vec3; 3]) -> [[f64; 3]; 3] {
    let [p0, p1, p2] = corners;
    let e = [sub(p2, p1), sub(p0, p2), sub(p1, p0)];
    let a = 0.5 * norm(cross(e[2], sub(p2, p0)));
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = dot(e[i], e[j]) / (4.0 * a);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

fn check_areas(mesh: &TriangleMesh) -> Result<(), FemError> {
    let count = mesh.triangle_count();
    if count == 0 {
        return Err(FemError::Empty);
    }
    let areas: Vec<f64> = (0..count).map(|t| mesh.triangle_area(t)).collect();
    let mean = areas.iter().sum::<f64>() / count as f64;
    match areas
        .iter()
        .position(|&a| !(a > DEGENERATE_AREA_RATIO * mean))
    {
        Some(triangle) => Err(FemError::DegenerateTriangle {
            triangle,
            area: areas[triangle],
        }),
        None => Ok(()),
    }
}

fn assemble(
    mesh: &TriangleMesh,
    local: impl Fn([Vec3; 3]) -> [[f64; 3]; 3],
) -> Result<SparseSymMatrix, FemError> {
    check_areas(mesh)?;
    let mut m = SparseSymMatrix::from_pattern(&mesh.vertex_neighbors());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let block = local(mesh.corners(t));
        for a in 0..3 {
            for b in 0..3 {
                m.add(tri[a], tri[b], block[a][b]);
            }
        }
    }
    Ok(m)
}

pub fn assemble_mass(mesh: &TriangleMesh) -> Result<SparseSymMatrix, FemError> {
    assemble(mesh, local_mass)
}

pub fn assemble_stiffness(mesh: &TriangleMesh) -> Result<SparseSymMatrix, FemError> {
    assemble(mesh, local_stiffness)
}

/// `Ĉ_ii = (ψ_i, 1)`: a third of the area of the triangles around vertex `i`.
pub fn lumped_mass(mesh: &TriangleMesh) -> Result<SparseSymMatrix, FemError> {
    check_areas(mesh)?;
    let mut diag = vec![0.0; mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.triangle_area(t) / 3.0;
        for &v in tri {
            diag[v] += third;
        }
    }
    Ok(SparseSymMatrix::from_diagonal(&diag))
}
