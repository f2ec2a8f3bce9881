//! Shape-preservation and noise metrics reported after every update.

use crate::geom::{Mesh, Vector};

/// Mean distance between deformed and reference vertex positions.
pub fn mean_vertex_displacement(mesh: &Mesh) -> f64 {
    let n = mesh.num_vertices();
    if n == 0 {
        return 0.0;
    }
    mesh.vertices()
        .iter()
        .zip(mesh.reference_vertices())
        .map(|(v, r)| (v - r).norm())
        .sum::<f64>()
        / n as f64
}

/// Mean angle in radians between the normals of faces sharing an edge.
pub fn mean_adjacent_normal_difference(mesh: &Mesh, normals: &[Vector]) -> f64 {
    let topo = mesh.topology();
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, b, _) in topo.dual_edges() {
        sum += normals[a].dot(&normals[b]).clamp(-1.0, 1.0).acos();
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean over faces of `|A'_k - A_k| / A_k` against the reference areas.
/// Faces with zero reference area are skipped.
pub fn relative_cell_area_difference(mesh: &Mesh) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, r) in mesh.face_areas().iter().zip(mesh.reference_face_areas()) {
        if r > 0.0 {
            sum += (a - r).abs() / r;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
