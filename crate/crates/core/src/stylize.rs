//! Normal-driven as-rigid-as-possible vertex recovery.
//!
//! Minimizes `sum_k sum_{(i,j) in N_k} w_ij |R_k e_ij - e'_ij|^2 +
//! lambda a_k |R_k n_k - t_k|^2` over deformed positions `V'` and
//! per-element rotations `R_k` by alternating closed-form rotation fits and
//! a prefactored Laplacian solve.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, Vector};
use crate::linalg::{fit_rotation, SpdFactor};

pub const COT_MIN: f64 = 1e-6;
pub const COT_MAX: f64 = 1e6;
pub const DEFAULT_LAMBDA: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    /// One element per vertex: its spokes and the rim edges of its fan.
    RimSpoke,
    /// One element per face: its three edges.
    FaceOnly,
}

#[derive(Debug, Clone, Copy)]
struct ElementEdge {
    i: u32,
    j: u32,
    w: f64,
    /// Reference edge vector `v_j - v_i`.
    e: Vector,
}

/// Per-element rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationField(pub Vec<Matrix3<f64>>);

#[derive(Debug)]
pub struct ArapSystem {
    kind: ElementKind,
    lambda: f64,
    num_vertices: usize,
    num_faces: usize,
    edges: Vec<ElementEdge>,
    offsets: Vec<usize>,
    normals: Vec<Vector>,
    areas: Vec<f64>,
    /// Face weights averaged into each element's target (rim-spoke only).
    target_faces: Vec<(u32, f64)>,
    target_offsets: Vec<usize>,
    /// Fixed positions; `None` marks automatic anchors that keep the
    /// position they have in the current iterate.
    constraints: Vec<(usize, Option<Point>)>,
    free: Vec<Option<usize>>,
    factor: SpdFactor,
    /// Off-diagonal couplings from free rows to constrained vertices.
    coupling: Vec<(usize, usize, f64)>,
    clamped: usize,
}

/// Half-cotangent of the angle at `c` opposite edge `ab`, clamped.
pub(crate) fn half_cot(a: &Point, b: &Point, c: &Point) -> (f64, bool) {
    let u = a - c;
    let v = b - c;
    let cross = u.cross(&v).norm();
    let raw = if cross > 0.0 { u.dot(&v) / cross } else { f64::INFINITY };
    let clamped = raw.clamp(COT_MIN, COT_MAX);
    (0.5 * clamped, clamped != raw)
}

impl ArapSystem {
    /// Builds and factors the system on the mesh's reference shape.
    /// Unconstrained connected components are anchored at one vertex.
    pub fn build(
        mesh: &Mesh,
        kind: ElementKind,
        lambda: f64,
        constraints: &[(usize, Point)],
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be non-negative".into()));
        }
        let nv = mesh.num_vertices();
        let faces = mesh.faces();
        let reference = mesh.reference_vertices();
        let face_normals = mesh.reference_face_normals()?;
        let face_areas = mesh.reference_face_areas();

        // per-face edge weights, edge (v[k], v[k+1]) opposite v[k+2]
        let mut clamped = 0;
        let mut face_edges = Vec::with_capacity(faces.len());
        for f in faces {
            let mut es = [(0u32, 0u32, 0.0, Vector::zeros()); 3];
            for k in 0..3 {
                let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let (w, c) = half_cot(&reference[i], &reference[j], &reference[o]);
                clamped += c as usize;
                es[k] = (i as u32, j as u32, w, reference[j] - reference[i]);
            }
            face_edges.push(es);
        }
        if clamped > 0 {
            tracing::warn!(clamped, "cotangent weights clamped on degenerate triangles");
        }

        let mut edges = Vec::new();
        let mut offsets = vec![0];
        let mut normals = Vec::new();
        let mut areas = Vec::new();
        let mut target_faces = Vec::new();
        let mut target_offsets = vec![0];
        let push_face = |edges: &mut Vec<ElementEdge>, f: usize| {
            for &(i, j, w, e) in &face_edges[f] {
                edges.push(ElementEdge { i, j, w, e });
            }
        };
        match kind {
            ElementKind::FaceOnly => {
                for f in 0..faces.len() {
                    push_face(&mut edges, f);
                    offsets.push(edges.len());
                    normals.push(face_normals[f]);
                    areas.push(face_areas[f]);
                }
            }
            ElementKind::RimSpoke => {
                let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
                for (f, face) in faces.iter().enumerate() {
                    for &v in face {
                        incident[v].push(f);
                    }
                }
                for fan in &incident {
                    if fan.is_empty() {
                        continue;
                    }
                    let mut n = Vector::zeros();
                    let mut a = 0.0;
                    for &f in fan {
                        push_face(&mut edges, f);
                        n += face_normals[f] * face_areas[f];
                        a += face_areas[f];
                        target_faces.push((f as u32, face_areas[f]));
                    }
                    offsets.push(edges.len());
                    target_offsets.push(target_faces.len());
                    normals.push(n.try_normalize(0.0).unwrap_or_else(Vector::z));
                    areas.push(a / 3.0);
                }
            }
        }

        // Laplacian over every element-edge membership
        let mut diag = vec![0.0; nv];
        let mut off: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for e in &edges {
            let (i, j) = (e.i as usize, e.j as usize);
            diag[i] += e.w;
            diag[j] += e.w;
            off.push((i.max(j), i.min(j), -e.w));
        }

        let mut constraint_list: Vec<(usize, Option<Point>)> = Vec::new();
        let mut is_constrained = vec![false; nv];
        for &(v, p) in constraints {
            if v >= nv {
                return Err(Error::InvalidParameter(format!(
                    "constrained vertex {v} out of range ({nv} vertices)"
                )));
            }
            if !is_constrained[v] {
                is_constrained[v] = true;
                constraint_list.push((v, Some(p)));
            }
        }
        for root in component_roots(nv, faces, &is_constrained) {
            is_constrained[root] = true;
            constraint_list.push((root, None));
        }
        let mut free = vec![None; nv];
        let mut count = 0;
        for v in 0..nv {
            if !is_constrained[v] {
                free[v] = Some(count);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Solver("every vertex is constrained".into()));
        }

        let mut triplets = Vec::with_capacity(off.len() + count);
        let mut coupling = Vec::new();
        for v in 0..nv {
            if let Some(r) = free[v] {
                triplets.push((r, r, diag[v]));
            }
        }
        for &(a, b, w) in &off {
            match (free[a], free[b]) {
                (Some(ra), Some(rb)) => triplets.push((ra.max(rb), ra.min(rb), w)),
                (Some(ra), None) => coupling.push((ra, b, w)),
                (None, Some(rb)) => coupling.push((rb, a, w)),
                (None, None) => {}
            }
        }
        let factor = SpdFactor::new(count, &triplets)?;

        Ok(Self {
            kind,
            lambda,
            num_vertices: nv,
            num_faces: faces.len(),
            edges,
            offsets,
            normals,
            areas,
            target_faces,
            target_offsets,
            constraints: constraint_list,
            free,
            factor,
            coupling,
            clamped,
        })
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_elements(&self) -> usize {
        self.normals.len()
    }

    /// Number of cotangent weights that hit the clamp.
    pub fn clamped_weights(&self) -> usize {
        self.clamped
    }

    fn element_edges(&self, k: usize) -> &[ElementEdge] {
        &self.edges[self.offsets[k]..self.offsets[k + 1]]
    }

    fn element_target(&self, k: usize, t: &[Vector]) -> Vector {
        match self.kind {
            ElementKind::FaceOnly => t[k],
            ElementKind::RimSpoke => {
                let list = &self.target_faces[self.target_offsets[k]..self.target_offsets[k + 1]];
                let sum = list
                    .iter()
                    .fold(Vector::zeros(), |acc, &(f, a)| acc + t[f as usize] * a);
                sum.try_normalize(0.0).unwrap_or(self.normals[k])
            }
        }
    }

    fn check(&self, vertices: &[Point], t: &[Vector], faces: usize) -> Result<()> {
        if vertices.len() != self.num_vertices {
            return Err(Error::SizeMismatch {
                what: "vertices",
                expected: self.num_vertices,
                got: vertices.len(),
            });
        }
        if t.len() != faces {
            return Err(Error::SizeMismatch {
                what: "target normals",
                expected: faces,
                got: t.len(),
            });
        }
        Ok(())
    }

    /// Best rotation per element for fixed positions and targets.
    pub fn local_step(&self, vertices: &[Point], t: &[Vector]) -> RotationField {
        let rotations = (0..self.num_elements())
            .into_par_iter()
            .map(|k| {
                let mut s = Matrix3::zeros();
                for e in self.element_edges(k) {
                    let ed = vertices[e.j as usize] - vertices[e.i as usize];
                    s += e.e * ed.transpose() * e.w;
                }
                let target = self.element_target(k, t);
                s += self.normals[k] * target.transpose() * (self.lambda * self.areas[k]);
                fit_rotation(&s)
            })
            .collect();
        RotationField(rotations)
    }

    /// Positions minimizing the edge term for fixed rotations. Constrained
    /// vertices keep their fixed values; automatic anchors keep their
    /// position in `current`.
    pub fn global_step(&self, rotations: &RotationField, current: &[Point]) -> Result<Vec<Point>> {
        if rotations.0.len() != self.num_elements() {
            return Err(Error::SizeMismatch {
                what: "rotations",
                expected: self.num_elements(),
                got: rotations.0.len(),
            });
        }
        let mut fixed: Vec<Option<Point>> = vec![None; self.num_vertices];
        for &(v, p) in &self.constraints {
            fixed[v] = Some(p.unwrap_or(current[v]));
        }
        let n = self.factor.dim();
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..self.num_elements() {
            let r = &rotations.0[k];
            for e in self.element_edges(k) {
                let v = (r * e.e) * e.w;
                if let Some(j) = self.free[e.j as usize] {
                    for c in 0..3 {
                        rhs[c][j] += v[c];
                    }
                }
                if let Some(i) = self.free[e.i as usize] {
                    for c in 0..3 {
                        rhs[c][i] -= v[c];
                    }
                }
            }
        }
        for &(row, vertex, w) in &self.coupling {
            let p = fixed[vertex].expect("coupled vertex is constrained");
            for c in 0..3 {
                rhs[c][row] -= w * p[c];
            }
        }
        self.factor.solve_columns(&mut rhs)?;
        Ok((0..self.num_vertices)
            .map(|v| match self.free[v] {
                Some(r) => Point::new(rhs[0][r], rhs[1][r], rhs[2][r]),
                None => fixed[v].expect("vertex is free or constrained"),
            })
            .collect())
    }

    /// Objective value for the given state.
    pub fn energy(&self, vertices: &[Point], rotations: &RotationField, t: &[Vector]) -> f64 {
        (0..self.num_elements())
            .map(|k| {
                let r = &rotations.0[k];
                let edge: f64 = self
                    .element_edges(k)
                    .iter()
                    .map(|e| {
                        let ed = vertices[e.j as usize] - vertices[e.i as usize];
                        e.w * (r * e.e - ed).norm_squared()
                    })
                    .sum();
                let target = self.element_target(k, t);
                edge + self.lambda * self.areas[k] * (r * self.normals[k] - target).norm_squared()
            })
            .sum()
    }

    /// Alternates local and global steps `iters` times from `v_init`.
    pub fn solve(&self, t: &[Vector], v_init: &[Point], iters: usize) -> Result<StyleSolution> {
        if iters == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        self.check(v_init, t, self.num_faces)?;
        let mut vertices = v_init.to_vec();
        let mut energies = Vec::with_capacity(iters);
        let mut rotations = RotationField(Vec::new());
        for _ in 0..iters {
            rotations = self.local_step(&vertices, t);
            vertices = self.global_step(&rotations, &vertices)?;
            energies.push(self.energy(&vertices, &rotations, t));
        }
        Ok(StyleSolution {
            vertices,
            rotations,
            energies,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StyleSolution {
    pub vertices: Vec<Point>,
    pub rotations: RotationField,
    /// Objective after each local-global pair.
    pub energies: Vec<f64>,
}

/// Lowest vertex of every connected component (including isolated
/// vertices) that has no constrained vertex.
fn component_roots(nv: usize, faces: &[[usize; 3]], constrained: &[bool]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for f in faces {
        for k in 0..3 {
            let (a, b) = (find(&mut parent, f[k]), find(&mut parent, f[(k + 1) % 3]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut has_constraint = vec![false; nv];
    for v in 0..nv {
        if constrained[v] {
            let r = find(&mut parent, v);
            has_constraint[r] = true;
        }
    }
    let mut roots = Vec::new();
    for v in 0..nv {
        let r = find(&mut parent, v);
        if r == v && !has_constraint[r] {
            roots.push(v);
        }
    }
    roots
}
