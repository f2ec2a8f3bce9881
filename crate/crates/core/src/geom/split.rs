//! Midpoint edge splits applied to the deformed and reference shapes alike.

use super::{Mesh, Topology};
use crate::error::{Error, Result};

/// What happened to one requested edge in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOutcome {
    /// Split; carries the index of the new midpoint vertex.
    Split { new_vertex: usize },
    /// Boundary edge, never split.
    Boundary,
    /// An adjacent face was already replaced earlier in the batch.
    Deferred,
    /// No such edge in the mesh.
    Missing,
}

/// Splits a single interior edge at its midpoint.
pub fn split_edge(mesh: &Mesh, a: usize, b: usize) -> Result<Mesh> {
    let (out, outcomes) = split_edges(mesh, &[(a, b)]);
    match outcomes[0] {
        SplitOutcome::Split { .. } => Ok(out),
        SplitOutcome::Boundary => Err(Error::BoundaryEdge {
            a: a.min(b),
            b: a.max(b),
        }),
        SplitOutcome::Deferred | SplitOutcome::Missing => Err(Error::StaleEdge {
            a: a.min(b),
            b: a.max(b),
        }),
    }
}

/// Splits a batch of edges in one topological pass. Edges are resolved
/// against the input mesh; an edge whose neighbourhood was already modified
/// by an earlier split in the same batch is deferred rather than split.
///
/// Replaced faces keep their index (first child) and the second child is
/// appended, so untouched faces keep their indices. New vertices are
/// appended in request order.
pub fn split_edges(mesh: &Mesh, requests: &[(usize, usize)]) -> (Mesh, Vec<SplitOutcome>) {
    let topo = Topology::build(mesh);
    let mut vertices = mesh.vertices().to_vec();
    let mut reference = mesh.reference_vertices().to_vec();
    let mut faces = mesh.faces().to_vec();
    let mut touched = vec![false; faces.len()];
    let mut outcomes = Vec::with_capacity(requests.len());

    for &(a, b) in requests {
        let Some(idx) = topo.find(a, b) else {
            outcomes.push(SplitOutcome::Missing);
            continue;
        };
        let edge = topo.edge(idx);
        if !edge.is_interior() {
            outcomes.push(SplitOutcome::Boundary);
            continue;
        }
        let adjacent: Vec<usize> = edge.adjacent_faces().collect();
        if adjacent.iter().any(|&f| touched[f]) {
            outcomes.push(SplitOutcome::Deferred);
            continue;
        }
        let (lo, hi) = edge.endpoints;
        let m = vertices.len();
        vertices.push(nalgebra::center(&vertices[lo], &vertices[hi]));
        reference.push(nalgebra::center(&reference[lo], &reference[hi]));

        for &f in &adjacent {
            // rotate so the split edge is (u, v) in face order, w opposite
            let face = faces[f];
            let k = (0..3)
                .find(|&i| {
                    let (u, v) = (face[i], face[(i + 1) % 3]);
                    (u == lo && v == hi) || (u == hi && v == lo)
                })
                .expect("adjacent face contains the edge");
            let (u, v, w) = (face[k], face[(k + 1) % 3], face[(k + 2) % 3]);
            faces[f] = [u, m, w];
            faces.push([m, v, w]);
            touched[f] = true;
            touched.push(true);
        }
        outcomes.push(SplitOutcome::Split { new_vertex: m });
    }

    (Mesh::from_parts_unchecked(vertices, reference, faces), outcomes)
}
