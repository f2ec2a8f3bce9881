use std::collections::HashMap;

use super::Mesh;

/// An undirected edge keyed by its sorted endpoint pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeRef {
    /// Lower vertex index first.
    pub endpoints: (usize, usize),
    faces: [Option<usize>; 2],
}

impl EdgeRef {
    pub fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    pub fn is_interior(&self) -> bool {
        self.faces[1].is_some()
    }

    pub fn faces(&self) -> [Option<usize>; 2] {
        self.faces
    }

    pub fn adjacent_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces.iter().flatten().copied()
    }

    /// The other face across this edge, if any.
    pub fn opposite(&self, face: usize) -> Option<usize> {
        match self.faces {
            [Some(a), b] if a == face => b,
            [a, Some(b)] if b == face => a,
            _ => None,
        }
    }
}

/// Edge table of a mesh: canonical edge list, lookup by endpoint pair and
/// the three edges bounding each face.
#[derive(Debug, Clone)]
pub struct Topology {
    edges: Vec<EdgeRef>,
    lookup: HashMap<(usize, usize), usize>,
    face_edges: Vec<[usize; 3]>,
}

impl Topology {
    pub fn build(mesh: &Mesh) -> Self {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.num_faces() * 2);
        let mut edges: Vec<EdgeRef> = Vec::with_capacity(mesh.num_faces() * 3 / 2 + 1);
        let mut face_edges = Vec::with_capacity(mesh.num_faces());
        for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
            let mut slots = [0usize; 3];
            for (slot, (u, v)) in slots.iter_mut().zip([(a, b), (b, c), (c, a)]) {
                let key = EdgeRef::key(u, v);
                let idx = *lookup.entry(key).or_insert_with(|| {
                    edges.push(EdgeRef {
                        endpoints: key,
                        faces: [None, None],
                    });
                    edges.len() - 1
                });
                let e = &mut edges[idx];
                if e.faces[0].is_none() {
                    e.faces[0] = Some(f);
                } else {
                    e.faces[1] = Some(f);
                }
                *slot = idx;
            }
            face_edges.push(slots);
        }

        // canonical order: sorted by endpoint pair
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_unstable_by_key(|&i| edges[i].endpoints);
        let mut remap = vec![0usize; edges.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let edges: Vec<EdgeRef> = order.iter().map(|&i| edges[i]).collect();
        for slots in &mut face_edges {
            for s in slots.iter_mut() {
                *s = remap[*s];
            }
        }
        for idx in lookup.values_mut() {
            *idx = remap[*idx];
        }
        Self {
            edges,
            lookup,
            face_edges,
        }
    }

    pub fn edges(&self) -> &[EdgeRef] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &EdgeRef {
        &self.edges[index]
    }

    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&EdgeRef::key(a, b)).copied()
    }

    /// Edge indices of face `f`, in the order (v0v1, v1v2, v2v0).
    pub fn face_edges(&self, face: usize) -> [usize; 3] {
        self.face_edges[face]
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    /// Edges of the faces adjacent to `edge`, excluding `edge` itself: four
    /// for an interior edge, two for a boundary edge.
    pub fn ring_edges(&self, edge: usize) -> Vec<usize> {
        self.edges[edge]
            .adjacent_faces()
            .flat_map(|f| self.face_edges[f])
            .filter(|&e| e != edge)
            .collect()
    }

    /// Face-adjacency pairs across interior edges, with the shared edge index.
    pub fn dual_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges.iter().enumerate().filter_map(|(i, e)| match e.faces {
            [Some(a), Some(b)] => Some((a, b, i)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    fn quad() -> Mesh {
        Mesh::new(
            vec![
                Point::new(0., 0., 0.),
                Point::new(1., 0., 0.),
                Point::new(1., 1., 0.),
                Point::new(0., 1., 0.),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn quad_diagonal_ring() {
        let m = quad();
        let t = m.topology();
        assert_eq!(t.edges().len(), 5);
        let diag = t.find(2, 0).unwrap();
        assert!(t.edge(diag).is_interior());
        let ring = t.ring_edges(diag);
        assert_eq!(ring.len(), 4);
        // all ring edges are boundary edges of the patch
        assert!(ring.iter().all(|&e| !t.edge(e).is_interior()));
        let mut keys: Vec<_> = ring.iter().map(|&e| t.edge(e).endpoints).collect();
        keys.sort();
        assert_eq!(keys, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn tetrahedron_ring_is_four_distinct_edges() {
        let m = crate::shapes::tetrahedron();
        let t = m.topology();
        assert_eq!(t.edges().len(), 6);
        for e in 0..6 {
            let mut ring = t.ring_edges(e);
            assert_eq!(ring.len(), 4);
            ring.sort();
            ring.dedup();
            assert_eq!(ring.len(), 4);
            // the only edge not in the ring is the opposite one, which
            // shares no endpoint with e
            let (a, b) = t.edge(e).endpoints;
            let missing: Vec<usize> = (0..6).filter(|x| *x != e && !ring.contains(x)).collect();
            assert_eq!(missing.len(), 1);
            let (c, d) = t.edge(missing[0]).endpoints;
            assert!(a != c && a != d && b != c && b != d);
        }
    }

    #[test]
    fn closed_mesh_edges_see_both_orientations() {
        let m = crate::shapes::icosphere(2);
        let t = m.topology();
        for e in t.edges() {
            assert!(e.is_interior());
            let (a, b) = e.endpoints;
            let mut forward = 0;
            let mut backward = 0;
            for f in e.adjacent_faces() {
                let face = m.faces()[f];
                for i in 0..3 {
                    let (u, v) = (face[i], face[(i + 1) % 3]);
                    if (u, v) == (a, b) {
                        forward += 1;
                    }
                    if (u, v) == (b, a) {
                        backward += 1;
                    }
                }
            }
            assert_eq!((forward, backward), (1, 1));
        }
        // Euler characteristic of a sphere
        let chi = m.num_vertices() as i64 - t.edges().len() as i64 + m.num_faces() as i64;
        assert_eq!(chi, 2);
    }

    #[test]
    fn boundary_ring_includes_boundary_edges() {
        // 2x1 strip of quads: the middle vertical edge's ring includes
        // boundary edges
        let m = crate::shapes::grid_patch(2, 1, 1.0);
        let t = m.topology();
        for (i, e) in t.edges().iter().enumerate() {
            if e.is_interior() {
                assert_eq!(t.ring_edges(i).len(), 4);
            } else {
                assert_eq!(t.ring_edges(i).len(), 2);
            }
        }
    }
}
