//! Procedural fixture meshes.
//!
//! All generators return consistently oriented manifold meshes with outward
//! (or, for open patches, `+z`/`+y` facing) normals. They are not normalized;
//! call [`Mesh::normalize_scale`] when the working scale matters.

use std::collections::HashMap;

use crate::geom::{Mesh, Point, Vector};

/// Unit-radius icosphere; level 0 is the icosahedron, level `l` has
/// `20 * 4^l` faces.
pub fn icosphere(level: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::from(Vector::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (verts[a].coords + verts[b].coords).normalize();
                verts.push(Point::from(m));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("icosphere is manifold")
}

/// Axis-aligned cube of side 2 centred at the origin, each side an `n x n`
/// grid of cells split into two triangles (`12 n^2` faces).
pub fn cube(n: usize) -> Mesh {
    let n = n.max(1);
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let ni = n as i64;
    let mut vertex = |lattice: [i64; 3], verts: &mut Vec<Point>| -> usize {
        *index.entry(lattice).or_insert_with(|| {
            let f = |k: i64| 2.0 * k as f64 / n as f64 - 1.0;
            verts.push(Point::new(f(lattice[0]), f(lattice[1]), f(lattice[2])));
            verts.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [0, ni] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..ni {
                for j in 0..ni {
                    let corner = |di: i64, dj: i64| {
                        let mut l = [0i64; 3];
                        l[axis] = side;
                        l[u] = i + di;
                        l[v] = j + dj;
                        l
                    };
                    let q = [
                        vertex(corner(0, 0), &mut vertices),
                        vertex(corner(1, 0), &mut vertices),
                        vertex(corner(1, 1), &mut vertices),
                        vertex(corner(0, 1), &mut vertices),
                    ];
                    // (u, v, axis) is right-handed, so q is CCW seen from +axis
                    let outward = side == ni;
                    let tris = if (i + j) % 2 == 0 {
                        [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
                    } else {
                        [[q[0], q[1], q[3]], [q[1], q[2], q[3]]]
                    };
                    for [a, b, c] in tris {
                        faces.push(if outward { [a, b, c] } else { [a, c, b] });
                    }
                }
            }
        }
    }
    Mesh::new(vertices, faces).expect("cube is manifold")
}

/// Sphere-projected cube with a smooth radial bump field; non-convex for
/// `amplitude > 0`. `12 n^2` faces.
pub fn blob(n: usize, amplitude: f64) -> Mesh {
    let c = cube(n);
    let vertices = c
        .vertices()
        .iter()
        .map(|p| {
            let d = p.coords.normalize();
            let r = 1.0
                + amplitude
                    * ((3.0 * d.x).sin() * (2.0 * d.y + 0.5).sin()
                        + 0.5 * (4.0 * d.z + 1.0).sin() * (2.5 * d.x).cos());
            Point::from(d * r)
        })
        .collect();
    Mesh::new(vertices, c.faces().to_vec()).expect("blob is manifold")
}

pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![
            Point::new(1.0, 1.0, 1.0),
            Point::new(1.0, -1.0, -1.0),
            Point::new(-1.0, 1.0, -1.0),
            Point::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .expect("tetrahedron is manifold")
}

pub fn octahedron() -> Mesh {
    Mesh::new(
        vec![
            Point::new(1.0, 0.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, -1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
            Point::new(0.0, 0.0, -1.0),
        ],
        vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ],
    )
    .expect("octahedron is manifold")
}

/// Unit-area square in the `z = 0` plane facing `+z`, two triangles.
pub fn plate() -> Mesh {
    Mesh::new(
        vec![
            Point::new(-0.5, -0.5, 0.0),
            Point::new(0.5, -0.5, 0.0),
            Point::new(0.5, 0.5, 0.0),
            Point::new(-0.5, 0.5, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("plate is manifold")
}

/// `nx x ny` cells of size `cell` in the `z = 0` plane facing `+z`.
pub fn grid_patch(nx: usize, ny: usize, cell: f64) -> Mesh {
    heightfield(nx, ny, cell, |_, _| 0.0)
}

/// Grid in the xy-plane centred at the origin with `z = height(x, y)`.
pub fn heightfield(nx: usize, ny: usize, cell: f64, height: impl Fn(f64, f64) -> f64) -> Mesh {
    let (x0, y0) = (-(nx as f64) * cell / 2.0, -(ny as f64) * cell / 2.0);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (x0 + i as f64 * cell, y0 + j as f64 * cell);
            vertices.push(Point::new(x, y, height(x, y)));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(nx * ny * 2);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    Mesh::new(vertices, faces).expect("grid is manifold")
}

/// Steep tent-shaped roof whose ridge line meanders across the grid, so the
/// ridge cuts through cells and forms jagged corners on the triangulation.
/// The slopes face within about 30° of the horizon.
pub fn bent_ridge(n: usize) -> Mesh {
    let cell = 2.0 / n as f64;
    heightfield(n, n, cell, |x, y| {
        let ridge = 0.35 * (1.3 * y).sin();
        2.0 * (1.0 - (x - ridge).abs()).max(0.0)
    })
}

/// Two inclined planes meeting at the bottom of a groove along the y axis.
pub fn v_groove(depth: f64) -> Mesh {
    heightfield(4, 2, 0.5, move |x, _| depth * x.abs())
}

/// Vertical wall in the `y = 0` plane facing `+y`, `nx x nz` cells, base
/// at `z = 0`.
pub fn wall(nx: usize, nz: usize, width: f64, height: f64) -> Mesh {
    let grid = heightfield(nx, nz, 1.0, |_, _| 0.0);
    let vertices = grid
        .vertices()
        .iter()
        .map(|p| {
            let u = p.x / nx as f64 + 0.5;
            let v = p.y / nz as f64 + 0.5;
            // grid (x, y) maps to (x, z); the winding flip below makes it face +y
            Point::new((u - 0.5) * width, 0.0, v * height)
        })
        .collect();
    let faces = grid.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
    Mesh::new(vertices, faces).expect("wall is manifold")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_euler(m: &Mesh) -> i64 {
        m.num_vertices() as i64 - m.topology().edges().len() as i64 + m.num_faces() as i64
    }

    #[test]
    fn closed_fixtures_are_spheres() {
        for m in [icosphere(0), icosphere(3), cube(3), blob(4, 0.1), tetrahedron(), octahedron()] {
            assert_eq!(closed_euler(&m), 2);
            assert!(m.topology().edges().iter().all(|e| e.is_interior()));
        }
        assert_eq!(icosphere(3).num_faces(), 1280);
        assert_eq!(cube(9).num_faces(), 972);
    }

    #[test]
    fn closed_fixtures_face_outward() {
        for m in [icosphere(2), cube(3), octahedron(), tetrahedron(), blob(3, 0.0)] {
            let normals = m.face_normals().unwrap();
            for (f, n) in normals.iter().enumerate() {
                let [a, b, c] = m.triangle(f);
                let centroid = (a.coords + b.coords + c.coords) / 3.0;
                assert!(n.dot(&centroid) > 0.0);
            }
        }
    }

    #[test]
    fn open_fixture_orientation() {
        let n = plate().face_normals().unwrap();
        assert!(n.iter().all(|n| n.z > 0.999));
        assert!((plate().total_area() - 1.0).abs() < 1e-15);
        let w = wall(4, 3, 2.0, 1.5);
        assert!(w.face_normals().unwrap().iter().all(|n| n.y > 0.999));
        assert!((w.total_area() - 3.0).abs() < 1e-12);
        let r = bent_ridge(10);
        assert!(r.face_normals().unwrap().iter().all(|n| n.z > 0.0));
    }
}
