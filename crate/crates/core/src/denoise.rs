//! Total-variation filtering of per-face normal fields.
//!
//! Minimizes `alpha/2 sum_k A_k |t'_k - t_k|^2 + sum_e l_e |t'_a - t'_b|`
//! over the dual graph by alternating direction multipliers: a prefactored
//! screened-Laplacian solve for the normals and a closed-form vector
//! shrinkage for the split edge differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mesh, Vector};
use crate::linalg::SpdFactor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvParams {
    /// Fidelity weight; larger values smooth less.
    pub alpha: f64,
    pub inner_iters: usize,
    /// Penalty relative to `alpha * mean area / mean edge length`, which
    /// makes the splitting behave the same at any mesh scale.
    pub penalty: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        Self {
            alpha: 250.0,
            inner_iters: 20,
            penalty: 1.0,
        }
    }
}

impl TvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter("tv alpha must be positive".into()));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParameter("tv inner_iters must be at least 1".into()));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::InvalidParameter("tv penalty must be positive".into()));
        }
        Ok(())
    }
}

struct DualGraph {
    /// (face a, face b, shared edge length)
    edges: Vec<(usize, usize, f64)>,
    areas: Vec<f64>,
}

impl DualGraph {
    fn new(mesh: &Mesh) -> Self {
        let topo = mesh.topology();
        let v = mesh.vertices();
        let edges = topo
            .dual_edges()
            .map(|(a, b, e)| {
                let (i, j) = topo.edge(e).endpoints;
                (a, b, (v[i] - v[j]).norm())
            })
            .collect();
        Self {
            edges,
            areas: mesh.face_areas(),
        }
    }
}

/// The filtering objective for output `t_out` against input `t_in`.
pub fn tv_objective(mesh: &Mesh, t_in: &[Vector], t_out: &[Vector], alpha: f64) -> f64 {
    objective(&DualGraph::new(mesh), t_in, t_out, alpha)
}

fn objective(g: &DualGraph, t_in: &[Vector], t_out: &[Vector], alpha: f64) -> f64 {
    let fidelity: f64 = g
        .areas
        .iter()
        .zip(t_in.iter().zip(t_out))
        .map(|(a, (x, y))| a * (x - y).norm_squared())
        .sum();
    let tv: f64 = g
        .edges
        .iter()
        .map(|&(a, b, l)| l * (t_out[a] - t_out[b]).norm())
        .sum();
    0.5 * alpha * fidelity + tv
}

/// Filters `t` and returns unit normals. `trace` receives the objective of
/// every inner iterate (before renormalization).
pub fn tv_filter_traced(
    mesh: &Mesh,
    t: &[Vector],
    params: &TvParams,
    mut trace: impl FnMut(f64),
) -> Result<Vec<Vector>> {
    params.validate()?;
    if t.len() != mesh.num_faces() {
        return Err(Error::SizeMismatch {
            what: "target normals",
            expected: mesh.num_faces(),
            got: t.len(),
        });
    }
    let g = DualGraph::new(mesh);
    if g.edges.is_empty() {
        return Ok(t.to_vec());
    }
    let nf = t.len();
    let alpha = params.alpha;
    let mean_area = g.areas.iter().sum::<f64>() / nf as f64;
    let mean_len = g.edges.iter().map(|e| e.2).sum::<f64>() / g.edges.len() as f64;
    let r = params.penalty * alpha * mean_area / mean_len;

    // (alpha A + r D^T W D) N = alpha A N0 + D^T W (mu + r p)
    let mut triplets = Vec::with_capacity(nf + 3 * g.edges.len());
    for (k, a) in g.areas.iter().enumerate() {
        triplets.push((k, k, alpha * a));
    }
    for &(a, b, l) in &g.edges {
        let w = r * l;
        triplets.push((a, a, w));
        triplets.push((b, b, w));
        triplets.push((a.max(b), a.min(b), -w));
    }
    let factor = SpdFactor::new(nf, &triplets)?;

    let mut n = t.to_vec();
    let diff = |n: &[Vector], e: &(usize, usize, f64)| n[e.0] - n[e.1];
    let mut p: Vec<Vector> = g.edges.iter().map(|e| diff(&n, e)).collect();
    let mut mu = vec![Vector::zeros(); g.edges.len()];
    for _ in 0..params.inner_iters {
        let mut rhs = [vec![0.0; nf], vec![0.0; nf], vec![0.0; nf]];
        for k in 0..nf {
            let v = t[k] * (alpha * g.areas[k]);
            for c in 0..3 {
                rhs[c][k] = v[c];
            }
        }
        for (e, &(a, b, l)) in g.edges.iter().enumerate() {
            let v = (mu[e] + p[e] * r) * l;
            for c in 0..3 {
                rhs[c][a] += v[c];
                rhs[c][b] -= v[c];
            }
        }
        factor.solve_columns(&mut rhs)?;
        for (k, nk) in n.iter_mut().enumerate() {
            *nk = Vector::new(rhs[0][k], rhs[1][k], rhs[2][k]);
        }
        for (e, edge) in g.edges.iter().enumerate() {
            let d = diff(&n, edge);
            let x = d - mu[e] / r;
            let norm = x.norm();
            p[e] = if norm > 1.0 / r {
                x * (1.0 - 1.0 / (r * norm))
            } else {
                Vector::zeros()
            };
            mu[e] += (p[e] - d) * r;
        }
        trace(objective(&g, t, &n, alpha));
    }
    n.iter()
        .zip(t)
        .enumerate()
        .map(|(k, (v, orig))| {
            v.try_normalize(1e-12)
                .or_else(|| orig.try_normalize(1e-12))
                .ok_or_else(|| Error::Degenerate(format!("filtered normal {k} vanished")))
        })
        .collect()
}

pub fn tv_filter(mesh: &Mesh, t: &[Vector], params: &TvParams) -> Result<Vec<Vector>> {
    tv_filter_traced(mesh, t, params, |_| {})
}
