//! Bounding volume hierarchy over mesh triangles (binned SAH build,
//! stack traversal, Möller–Trumbore triangle test).

use crate::geom::{Mesh, Point, Vector};

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub face: usize,
    pub t: f64,
    pub point: Point,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        lo: [f64::INFINITY; 3],
        hi: [f64::NEG_INFINITY; 3],
    };

    fn grow_point(&mut self, p: &[f64; 3]) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn grow(&mut self, other: &Aabb) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(other.lo[k]);
            self.hi[k] = self.hi[k].max(other.hi[k]);
        }
    }

    fn area(&self) -> f64 {
        let d = [
            (self.hi[0] - self.lo[0]).max(0.0),
            (self.hi[1] - self.lo[1]).max(0.0),
            (self.hi[2] - self.lo[2]).max(0.0),
        ];
        2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])
    }

    /// Slab test; returns the entry distance if the box is hit within
    /// `[0, t_max]`.
    #[inline]
    fn hit(&self, origin: &[f64; 3], inv_dir: &[f64; 3], t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            // NaN (0 * inf) comparisons fall through and keep the bound
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive. Interior: index of the right child (the left
    /// child immediately follows the node).
    offset: u32,
    /// Leaf primitive count; 0 for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v0: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    face: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
}

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Möller–Trumbore; returns `t` for a hit strictly inside `(t_min, t_max)`.
#[inline]
fn intersect_tri(tri: &Tri, o: &[f64; 3], d: &[f64; 3], t_min: f64, t_max: f64) -> Option<f64> {
    let p = cross(d, &tri.e2);
    let det = dot(&tri.e1, &p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub(o, &tri.v0);
    let u = dot(&s, &p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross(&s, &tri.e1);
    let v = dot(d, &q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = dot(&tri.e2, &q) * inv;
    (t > t_min && t < t_max).then_some(t)
}

/// Closest-hit ordering shared by the BVH and the brute-force reference:
/// smaller `t` wins, ties go to the lower face index.
#[inline]
fn closer(t: f64, face: u32, best: Option<(f64, u32)>) -> bool {
    match best {
        None => true,
        Some((bt, bf)) => t < bt || (t == bt && face < bf),
    }
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Self {
        let tris: Vec<Tri> = (0..mesh.num_faces())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let v0 = [a.x, a.y, a.z];
                Tri {
                    v0,
                    e1: sub(&[b.x, b.y, b.z], &v0),
                    e2: sub(&[c.x, c.y, c.z], &v0),
                    face: f as u32,
                }
            })
            .collect();
        let bounds: Vec<Aabb> = tris.iter().map(tri_bounds).collect();
        let centroids: Vec<[f64; 3]> = bounds
            .iter()
            .map(|b| {
                [
                    0.5 * (b.lo[0] + b.hi[0]),
                    0.5 * (b.lo[1] + b.hi[1]),
                    0.5 * (b.lo[2] + b.hi[2]),
                ]
            })
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len().max(1));
        if !tris.is_empty() {
            build_node(&mut nodes, &mut order, 0, &bounds, &centroids);
        }
        let tris = order.iter().map(|&i| tris[i]).collect();
        Self { nodes, tris }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.count > 0 {
                1
            } else {
                1 + walk(nodes, i + 1).max(walk(nodes, n.offset as usize))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Nearest hit with `t > t_min`, ignoring `skip`.
    pub fn intersect(
        &self,
        origin: &Point,
        dir: &Vector,
        t_min: f64,
        skip: Option<usize>,
    ) -> Option<Hit> {
        let o = [origin.x, origin.y, origin.z];
        let d = [dir.x, dir.y, dir.z];
        let inv = [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]];
        let skip = skip.map(|s| s as u32);
        let mut best: Option<(f64, u32)> = None;
        let mut t_max = f64::INFINITY;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        if self.nodes.is_empty() {
            return None;
        }
        let mut current = 0usize;
        loop {
            let node = &self.nodes[current];
            if node.count > 0 {
                let first = node.offset as usize;
                for tri in &self.tris[first..first + node.count as usize] {
                    if Some(tri.face) == skip {
                        continue;
                    }
                    // `<=` on the bound so exact ties can still prefer the
                    // lower face index
                    if let Some(t) = intersect_tri(tri, &o, &d, t_min, t_max.next_up()) {
                        if closer(t, tri.face, best) {
                            best = Some((t, tri.face));
                            t_max = t;
                        }
                    }
                }
            } else {
                let left = current + 1;
                let right = node.offset as usize;
                let hl = self.nodes[left].bounds.hit(&o, &inv, t_max);
                let hr = self.nodes[right].bounds.hit(&o, &inv, t_max);
                match (hl, hr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (left, right) } else { (right, left) };
                        stack[sp] = far as u32;
                        sp += 1;
                        current = near;
                        continue;
                    }
                    (Some(_), None) => {
                        current = left;
                        continue;
                    }
                    (None, Some(_)) => {
                        current = right;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            if sp == 0 {
                break;
            }
            sp -= 1;
            current = stack[sp] as usize;
        }
        best.map(|(t, face)| Hit {
            face: face as usize,
            t,
            point: origin + dir * t,
        })
    }

    /// True if anything is hit with `t > t_min`, ignoring `skip`.
    pub fn occluded(&self, origin: &Point, dir: &Vector, t_min: f64, skip: Option<usize>) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let o = [origin.x, origin.y, origin.z];
        let d = [dir.x, dir.y, dir.z];
        let inv = [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]];
        let skip = skip.map(|s| s as u32);
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut current = 0usize;
        loop {
            let node = &self.nodes[current];
            if node.bounds.hit(&o, &inv, f64::INFINITY).is_some() {
                if node.count > 0 {
                    let first = node.offset as usize;
                    for tri in &self.tris[first..first + node.count as usize] {
                        if Some(tri.face) != skip
                            && intersect_tri(tri, &o, &d, t_min, f64::INFINITY).is_some()
                        {
                            return true;
                        }
                    }
                } else {
                    stack[sp] = node.offset;
                    sp += 1;
                    current += 1;
                    continue;
                }
            }
            if sp == 0 {
                return false;
            }
            sp -= 1;
            current = stack[sp] as usize;
        }
    }

    /// Reference nearest-hit by testing every triangle.
    pub fn intersect_brute_force(
        &self,
        origin: &Point,
        dir: &Vector,
        t_min: f64,
        skip: Option<usize>,
    ) -> Option<Hit> {
        let o = [origin.x, origin.y, origin.z];
        let d = [dir.x, dir.y, dir.z];
        let skip = skip.map(|s| s as u32);
        let mut best: Option<(f64, u32)> = None;
        for tri in &self.tris {
            if Some(tri.face) == skip {
                continue;
            }
            if let Some(t) = intersect_tri(tri, &o, &d, t_min, f64::INFINITY) {
                if closer(t, tri.face, best) {
                    best = Some((t, tri.face));
                }
            }
        }
        best.map(|(t, face)| Hit {
            face: face as usize,
            t,
            point: origin + dir * t,
        })
    }
}

fn tri_bounds(t: &Tri) -> Aabb {
    let mut b = Aabb::EMPTY;
    b.grow_point(&t.v0);
    let p1 = [t.v0[0] + t.e1[0], t.v0[1] + t.e1[1], t.v0[2] + t.e1[2]];
    let p2 = [t.v0[0] + t.e2[0], t.v0[1] + t.e2[1], t.v0[2] + t.e2[2]];
    b.grow_point(&p1);
    b.grow_point(&p2);
    b
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    first: usize,
    bounds: &[Aabb],
    centroids: &[[f64; 3]],
) -> usize {
    let mut bb = Aabb::EMPTY;
    let mut cb = Aabb::EMPTY;
    for &i in order.iter() {
        bb.grow(&bounds[i]);
        cb.grow_point(&centroids[i]);
    }
    let index = nodes.len();
    nodes.push(Node {
        bounds: bb,
        offset: first as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return index;
    }

    // best SAH split over binned centroids on each axis
    let mut best: Option<(f64, usize, usize)> = None;
    for axis in 0..3 {
        let extent = cb.hi[axis] - cb.lo[axis];
        if extent <= 0.0 {
            continue;
        }
        let bin_of = |i: usize| {
            (((centroids[i][axis] - cb.lo[axis]) / extent * BINS as f64) as usize).min(BINS - 1)
        };
        let mut bin_bounds = [Aabb::EMPTY; BINS];
        let mut bin_count = [0usize; BINS];
        for &i in order.iter() {
            let b = bin_of(i);
            bin_bounds[b].grow(&bounds[i]);
            bin_count[b] += 1;
        }
        let mut right_area = [0.0; BINS];
        let mut right_count = [0usize; BINS];
        let mut acc = Aabb::EMPTY;
        let mut cnt = 0;
        for b in (1..BINS).rev() {
            acc.grow(&bin_bounds[b]);
            cnt += bin_count[b];
            right_area[b] = acc.area();
            right_count[b] = cnt;
        }
        let mut acc = Aabb::EMPTY;
        let mut cnt = 0;
        for b in 0..BINS - 1 {
            acc.grow(&bin_bounds[b]);
            cnt += bin_count[b];
            if cnt == 0 || right_count[b + 1] == 0 {
                continue;
            }
            let cost = acc.area() * cnt as f64 + right_area[b + 1] * right_count[b + 1] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, b));
            }
        }
    }

    let mid = match best {
        Some((_, axis, split_bin)) => {
            let extent = cb.hi[axis] - cb.lo[axis];
            let lo = cb.lo[axis];
            let mut left = 0;
            for k in 0..order.len() {
                let i = order[k];
                let b = (((centroids[i][axis] - lo) / extent * BINS as f64) as usize).min(BINS - 1);
                if b <= split_bin {
                    order.swap(k, left);
                    left += 1;
                }
            }
            left
        }
        None => order.len() / 2,
    };
    let mid = if mid == 0 || mid == order.len() {
        order.len() / 2
    } else {
        mid
    };

    let (left, right) = order.split_at_mut(mid);
    build_node(nodes, left, first, bounds, centroids);
    let right_index = build_node(nodes, right, first + mid, bounds, centroids);
    nodes[index].offset = right_index as u32;
    nodes[index].count = 0;
    index
}
