//! Triangle meshes carrying both a deformed and a reference vertex set.
//!
//! The optimizer deforms `vertices` while `reference_vertices` keeps the
//! undeformed rest shape used by the ARAP energy and by the shape
//! preservation metrics. Both share the same face connectivity, and every
//! topological edit (see [`split`]) is applied to both copies in lockstep.

mod obj;
pub mod split;
pub mod topology;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub use obj::{load_mesh, parse_obj, write_obj, write_obj_to};
pub use split::{split_edge, split_edges, SplitOutcome};
pub use topology::{EdgeRef, Topology};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Faces with area below this are treated as degenerate when a normal is
/// required.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Bounding-box diagonal that [`Mesh::normalize_scale`] rescales to.
pub const NORMALIZED_DIAGONAL: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    reference: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh whose reference shape equals `vertices`.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let reference = vertices.clone();
        Self::with_reference(vertices, reference, faces)
    }

    pub fn with_reference(
        vertices: Vec<Point>,
        reference: Vec<Point>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self> {
        if vertices.len() != reference.len() {
            return Err(Error::SizeMismatch {
                what: "reference vertices",
                expected: vertices.len(),
                got: reference.len(),
            });
        }
        validate_faces(vertices.len(), &faces)?;
        Ok(Self {
            vertices,
            reference,
            faces,
        })
    }

    /// Skips validation. Callers guarantee the invariants hold (used by
    /// edits that provably preserve them).
    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Point>,
        reference: Vec<Point>,
        faces: Vec<[usize; 3]>,
    ) -> Self {
        debug_assert_eq!(vertices.len(), reference.len());
        Self {
            vertices,
            reference,
            faces,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn reference_vertices(&self) -> &[Point] {
        &self.reference
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Returns a copy with the deformed positions replaced.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::SizeMismatch {
                what: "deformed vertices",
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            reference: self.reference.clone(),
            faces: self.faces.clone(),
        })
    }

    /// The undeformed shape as a standalone mesh.
    pub fn reference_mesh(&self) -> Self {
        Self {
            vertices: self.reference.clone(),
            reference: self.reference.clone(),
            faces: self.faces.clone(),
        }
    }

    /// Same geometry with every face's winding reversed.
    pub fn reversed(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            reference: self.reference.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Per-face unit normals of the deformed shape.
    pub fn face_normals(&self) -> Result<Vec<Vector>> {
        normals_of(&self.vertices, &self.faces)
    }

    /// Per-face unit normals of the reference shape.
    pub fn reference_face_normals(&self) -> Result<Vec<Vector>> {
        normals_of(&self.reference, &self.faces)
    }

    pub fn face_areas(&self) -> Vec<f64> {
        areas_of(&self.vertices, &self.faces)
    }

    pub fn reference_face_areas(&self) -> Vec<f64> {
        areas_of(&self.reference, &self.faces)
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    pub fn bbox(&self) -> Option<(Point, Point)> {
        bbox_of(&self.vertices)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox().map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0)
    }

    pub fn reference_bbox_diagonal(&self) -> f64 {
        bbox_of(&self.reference)
            .map(|(lo, hi)| (hi - lo).norm())
            .unwrap_or(0.0)
    }

    /// Centers the deformed bounding box at the origin and scales uniformly
    /// so its diagonal is [`NORMALIZED_DIAGONAL`]. The reference copy gets the
    /// identical similarity transform.
    pub fn normalize_scale(&self) -> Result<Self> {
        let (lo, hi) = self.bbox().ok_or(Error::EmptyMesh)?;
        let diagonal = (hi - lo).norm();
        if !(diagonal > 1e-12) {
            return Err(Error::Degenerate(format!(
                "bounding-box diagonal {diagonal:e} has no extent"
            )));
        }
        let center = nalgebra::center(&lo, &hi);
        let scale = NORMALIZED_DIAGONAL / diagonal;
        let map = |p: &Point| Point::origin() + (p - center) * scale;
        Ok(Self {
            vertices: self.vertices.iter().map(map).collect(),
            reference: self.reference.iter().map(map).collect(),
            faces: self.faces.clone(),
        })
    }

    /// Undirected edges with their incident faces, in canonical order.
    pub fn topology(&self) -> Topology {
        Topology::build(self)
    }
}

pub fn face_normal(a: &Point, b: &Point, c: &Point) -> Option<Vector> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if 0.5 * len < DEGENERATE_AREA {
        None
    } else {
        Some(n / len)
    }
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn normals_of(vertices: &[Point], faces: &[[usize; 3]]) -> Result<Vec<Vector>> {
    faces
        .iter()
        .enumerate()
        .map(|(f, &[a, b, c])| {
            let (pa, pb, pc) = (&vertices[a], &vertices[b], &vertices[c]);
            face_normal(pa, pb, pc).ok_or_else(|| Error::ZeroAreaFace {
                face: f,
                area: triangle_area(pa, pb, pc),
            })
        })
        .collect()
}

fn areas_of(vertices: &[Point], faces: &[[usize; 3]]) -> Vec<f64> {
    faces
        .iter()
        .map(|&[a, b, c]| triangle_area(&vertices[a], &vertices[b], &vertices[c]))
        .collect()
}

fn bbox_of(points: &[Point]) -> Option<(Point, Point)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

/// Checks index ranges, repeated vertices, edge-manifoldness and consistent
/// orientation.
fn validate_faces(vertex_count: usize, faces: &[[usize; 3]]) -> Result<()> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
    let mut undirected: HashMap<(usize, usize), u8> = HashMap::with_capacity(faces.len() * 2);
    for (f, face) in faces.iter().enumerate() {
        for &index in face {
            if index >= vertex_count {
                return Err(Error::IndexOutOfRange {
                    face: f,
                    index,
                    count: vertex_count,
                });
            }
        }
        let [a, b, c] = *face;
        if a == b || b == c || a == c {
            return Err(Error::RepeatedVertex { face: f });
        }
        for (u, v) in [(a, b), (b, c), (c, a)] {
            if directed.insert((u, v), f).is_some() {
                let (a, b) = (u.min(v), u.max(v));
                return Err(Error::NonManifold {
                    a,
                    b,
                    reason: "is traversed twice in the same direction (inconsistent orientation)",
                });
            }
            let count = undirected.entry((u.min(v), u.max(v))).or_insert(0);
            *count += 1;
            if *count > 2 {
                return Err(Error::NonManifold {
                    a: u.min(v),
                    b: u.max(v),
                    reason: "is shared by more than two faces",
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    fn quad() -> Mesh {
        Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(1., 1., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn axis_aligned_normal_and_reversal() {
        let m = Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_relative_eq!(m.face_normals().unwrap()[0], Vector::z(), epsilon = 1e-15);
        assert_relative_eq!(
            m.reversed().face_normals().unwrap()[0],
            -Vector::z(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn areas() {
        let right = Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_relative_eq!(right.face_areas()[0], 0.5);

        let h = 3f64.sqrt();
        let equilateral = Mesh::new(
            vec![p(0., 0., 0.), p(2., 0., 0.), p(1., h, 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_relative_eq!(equilateral.face_areas()[0], 3f64.sqrt(), epsilon = 1e-12);

        let collinear = Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(collinear.face_areas()[0], 0.0);
        assert!(matches!(
            collinear.face_normals(),
            Err(Error::ZeroAreaFace { face: 0, .. })
        ));
    }

    #[test]
    fn rejects_bad_indices_and_orientation() {
        let err = Mesh::new(vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 3]]);
        assert!(matches!(err, Err(Error::IndexOutOfRange { index: 3, .. })));

        let err = Mesh::new(vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 1]]);
        assert!(matches!(err, Err(Error::RepeatedVertex { face: 0 })));

        // second face reuses directed edge 0->1
        let err = Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., -1., 0.)],
            vec![[0, 1, 2], [0, 1, 3]],
        );
        assert!(matches!(err, Err(Error::NonManifold { .. })));

        let err = Mesh::new(
            vec![
                p(0., 0., 0.),
                p(1., 0., 0.),
                p(0., 1., 0.),
                p(0., -1., 0.),
                p(0., 0., 1.),
            ],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        );
        assert!(matches!(err, Err(Error::NonManifold { .. })));
    }

    #[test]
    fn normalize_unit_cube_scale() {
        let cube = crate::shapes::cube(1);
        // generator produces side 2; rescale to unit side first
        let unit = cube
            .with_vertices(cube.vertices().iter().map(|v| Point::from(v.coords * 0.5)).collect())
            .unwrap();
        let unit = Mesh::new(unit.vertices().to_vec(), unit.faces().to_vec()).unwrap();
        assert_relative_eq!(unit.bbox_diagonal(), 3f64.sqrt(), epsilon = 1e-12);
        let n = unit.normalize_scale().unwrap();
        assert_relative_eq!(n.bbox_diagonal(), 3.0, epsilon = 1e-12);
        let e0 = (unit.vertices()[1] - unit.vertices()[0]).norm();
        let e1 = (n.vertices()[1] - n.vertices()[0]).norm();
        assert_relative_eq!(e1 / e0, 3.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(e1 / e0, 1.7320508075688772, epsilon = 1e-12);
        // reference transformed identically
        assert_eq!(n.vertices(), n.reference_vertices());
    }

    #[test]
    fn normalize_fixed_point_up_to_centering() {
        let m = quad().normalize_scale().unwrap();
        let again = m.normalize_scale().unwrap();
        for (a, b) in m.vertices().iter().zip(again.vertices()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn normalize_rejects_point_cloud() {
        let m = Mesh::from_parts_unchecked(vec![p(1., 1., 1.); 3], vec![p(1., 1., 1.); 3], vec![]);
        assert!(matches!(m.normalize_scale(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn icosphere_normals_are_radial() {
        let sphere = crate::shapes::icosphere(3);
        let normals = sphere.face_normals().unwrap();
        for (f, n) in normals.iter().enumerate() {
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-9);
            let [a, b, c] = sphere.triangle(f);
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            let angle = n.angle(&centroid.normalize()).to_degrees();
            assert!(angle < 2.0, "face {f} deviates {angle} deg");
        }
    }
}
