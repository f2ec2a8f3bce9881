//! Direct vertex-descent baselines, optionally preconditioned by
//! `(I + mu L)^-1` or `(I + mu L^2)^-1` with the reference cotangent
//! Laplacian `L`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{evaluate, metrics, HistoryRow, HyperParams, Problem};
use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, Vector};
use crate::grad::{energy_gradient, TargetNormals};
use crate::linalg::SpdFactor;
use crate::stylize::half_cot;
use crate::trace::PhongScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Plain vertex descent.
    Direct,
    Laplacian,
    #[serde(rename = "bilaplacian")]
    BiLaplacian,
    /// The alternating normal/ARAP scheme.
    Ours,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Direct,
        Strategy::Laplacian,
        Strategy::BiLaplacian,
        Strategy::Ours,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Laplacian => "laplacian",
            Strategy::BiLaplacian => "bilaplacian",
            Strategy::Ours => "ours",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub mesh: Mesh,
    pub history: Vec<HistoryRow>,
    /// Set when the mesh degenerated and the run stopped early.
    pub failure: Option<String>,
}

/// Chains per-face normal gradients to vertex gradients through
/// `n = N / |N|`, `N = (b - a) x (c - a)`; area and sample-point
/// dependence are ignored.
pub fn vertex_gradient(mesh: &Mesh, normal_grad: &[Vector]) -> Result<Vec<Vector>> {
    let v = mesh.vertices();
    let mut out = vec![Vector::zeros(); v.len()];
    for (f, (&face, g)) in mesh.faces().iter().zip(normal_grad).enumerate() {
        let [a, b, c] = face.map(|i| v[i]);
        let n_raw = (b - a).cross(&(c - a));
        let len = n_raw.norm();
        if len < 2.0 * crate::geom::DEGENERATE_AREA {
            return Err(Error::ZeroAreaFace { face: f, area: 0.5 * len });
        }
        let n = n_raw / len;
        let g_raw = (g - n * n.dot(g)) / len;
        for k in 0..3 {
            let edge = v[face[(k + 2) % 3]] - v[face[(k + 1) % 3]];
            out[face[k]] += g_raw.cross(&edge);
        }
    }
    Ok(out)
}

/// Positive semi-definite cotangent Laplacian of the reference shape as
/// full symmetric triplets. Half-cotangents are clamped positive.
pub fn cotan_laplacian(mesh: &Mesh) -> Vec<(usize, usize, f64)> {
    let r = mesh.reference_vertices();
    let mut entries = Vec::with_capacity(mesh.num_faces() * 12);
    for f in mesh.faces() {
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let (w, _) = half_cot(&r[i], &r[j], &r[o]);
            entries.push((i, i, w));
            entries.push((j, j, w));
            entries.push((i, j, -w));
            entries.push((j, i, -w));
        }
    }
    entries
}

fn compress(n: usize, entries: &[(usize, usize, f64)]) -> Vec<BTreeMap<usize, f64>> {
    let mut rows = vec![BTreeMap::new(); n];
    for &(i, j, w) in entries {
        *rows[i].entry(j).or_insert(0.0) += w;
    }
    rows
}

/// `(I + mu L^order)`, factored once on the reference shape.
pub struct Preconditioner {
    factor: SpdFactor,
}

impl Preconditioner {
    pub fn new(mesh: &Mesh, mu: f64, order: u32) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::InvalidParameter("preconditioner order must be 1 or 2".into()));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter("mu must be non-negative".into()));
        }
        let n = mesh.num_vertices();
        let l = compress(n, &cotan_laplacian(mesh));
        let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        if order == 1 {
            for (i, row) in l.iter().enumerate() {
                triplets.extend(row.iter().map(|(&j, &w)| (i, j, mu * w)));
            }
        } else {
            // L symmetric: (L^2)_ij = sum_k L_ik L_kj
            for (i, row) in l.iter().enumerate() {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                for (&k, &a) in row {
                    for (&j, &b) in &l[k] {
                        *acc.entry(j).or_insert(0.0) += a * b;
                    }
                }
                triplets.extend(acc.into_iter().map(|(j, w)| (i, j, mu * w)));
            }
        }
        Ok(Self {
            factor: SpdFactor::new(n, &triplets)?,
        })
    }

    pub fn apply(&self, g: &[Vector]) -> Result<Vec<Vector>> {
        let n = g.len();
        let mut cols = [
            g.iter().map(|v| v.x).collect::<Vec<_>>(),
            g.iter().map(|v| v.y).collect(),
            g.iter().map(|v| v.z).collect(),
        ];
        self.factor.solve_columns(&mut cols)?;
        Ok((0..n)
            .map(|i| Vector::new(cols[0][i], cols[1][i], cols[2][i]))
            .collect())
    }
}

/// Mean norm of the reference Laplacian applied to the displacement field;
/// small values mean a smooth deformation.
pub fn displacement_laplacian_norm(mesh: &Mesh) -> f64 {
    let n = mesh.num_vertices();
    let l = compress(n, &cotan_laplacian(mesh));
    let d: Vec<Vector> = mesh
        .vertices()
        .iter()
        .zip(mesh.reference_vertices())
        .map(|(v, r)| v - r)
        .collect();
    l.iter()
        .map(|row| row.iter().map(|(&j, &w)| d[j] * w).sum::<Vector>().norm())
        .sum::<f64>()
        / n.max(1) as f64
}

/// Vertex descent for `updates` rounds of `n_gradient` steps each, using
/// the same gradient estimator and streams as the main optimizer. `order`
/// 0 is unpreconditioned.
pub fn baseline_run(
    problem: &Problem,
    params: &HyperParams,
    seed: u64,
    updates: usize,
    order: u32,
) -> Result<BaselineRun> {
    params.validate()?;
    let label = match order {
        0 => Strategy::Direct,
        1 => Strategy::Laplacian,
        2 => Strategy::BiLaplacian,
        _ => return Err(Error::InvalidParameter("preconditioner order must be 0, 1 or 2".into())),
    }
    .label();
    let preconditioner = match order {
        0 => None,
        k => Some(Preconditioner::new(&problem.mesh, params.mu, k)?),
    };
    let mut scene = problem.scene()?;
    let reference_normals = problem.mesh.reference_face_normals()?;
    let mut history = vec![row(&scene, &problem.spec, params, seed, 0, label)?];
    let mut step = 0u64;
    for update in 1..=updates {
        for _ in 0..params.n_gradient {
            let t = TargetNormals::new(scene.normals().to_vec())?;
            let (_, grad) = energy_gradient(&scene, &problem.spec, &t, params.sampling(), seed, step)?;
            step += 1;
            let g: Vec<Vector> = grad
                .as_slice()
                .iter()
                .enumerate()
                .map(|(k, gk)| gk + (t[k] - reference_normals[k]) * (params.beta * scene.areas()[k]))
                .collect();
            let mut dv = vertex_gradient(scene.mesh(), &g)?;
            if let Some(p) = &preconditioner {
                dv = p.apply(&dv)?;
            }
            for &(i, _) in &problem.constraints {
                dv[i] = Vector::zeros();
            }
            let moved: Vec<Point> = scene
                .mesh()
                .vertices()
                .iter()
                .zip(&dv)
                .map(|(p, d)| p - d * params.baseline_eta)
                .collect();
            if moved.iter().any(|p| !p.coords.iter().all(|x| x.is_finite())) {
                return Ok(BaselineRun {
                    mesh: scene.into_mesh(),
                    history,
                    failure: Some("vertex positions diverged".into()),
                });
            }
            let mesh = scene.mesh().with_vertices(moved)?;
            match scene.rebuild(mesh) {
                Ok(next) => scene = next,
                Err(e @ (Error::ZeroAreaFace { .. } | Error::Degenerate(_))) => {
                    tracing::warn!(strategy = label, update, "baseline mesh degenerated: {e}");
                    return Ok(BaselineRun {
                        mesh: scene.into_mesh(),
                        history,
                        failure: Some(e.to_string()),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        history.push(row(&scene, &problem.spec, params, seed, update, label)?);
    }
    Ok(BaselineRun {
        mesh: scene.into_mesh(),
        history,
        failure: None,
    })
}

fn row(
    scene: &PhongScene,
    spec: &crate::energy::ReflectivitySpec,
    params: &HyperParams,
    seed: u64,
    iteration: usize,
    label: &str,
) -> Result<HistoryRow> {
    let e = evaluate(scene, spec, params, seed)?;
    let mesh = scene.mesh();
    Ok(HistoryRow {
        iteration,
        stage: label.to_string(),
        e_refl: e.total,
        std_error: e.std_error,
        mean_vertex_disp: metrics::mean_vertex_displacement(mesh),
        mean_adj_normal_diff: metrics::mean_adjacent_normal_difference(mesh, scene.normals()),
        cell_area_diff: metrics::relative_cell_area_difference(mesh),
        face_count: mesh.num_faces(),
    })
}

pub fn baseline_vertex_descent(
    problem: &Problem,
    params: &HyperParams,
    seed: u64,
    updates: usize,
) -> Result<BaselineRun> {
    baseline_run(problem, params, seed, updates, 0)
}

pub fn baseline_preconditioned(
    problem: &Problem,
    params: &HyperParams,
    seed: u64,
    updates: usize,
    order: u32,
) -> Result<BaselineRun> {
    if order == 0 {
        return Err(Error::InvalidParameter("preconditioner order must be 1 or 2".into()));
    }
    baseline_run(problem, params, seed, updates, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ReflectivitySpec;
    use crate::shapes;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn vertex_gradient_matches_finite_differences() {
        let mesh = shapes::blob(2, 0.2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let g: Vec<Vector> = (0..mesh.num_faces())
            .map(|_| Vector::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let phi = |m: &Mesh| -> f64 {
            m.face_normals().unwrap().iter().zip(&g).map(|(n, g)| n.dot(g)).sum()
        };
        let analytic = vertex_gradient(&mesh, &g).unwrap();
        let h = 1e-6;
        for i in [0, 3, 7] {
            for c in 0..3 {
                let mut plus = mesh.vertices().to_vec();
                let mut minus = plus.clone();
                plus[i][c] += h;
                minus[i][c] -= h;
                let fd = (phi(&mesh.with_vertices(plus).unwrap()) - phi(&mesh.with_vertices(minus).unwrap())) / (2.0 * h);
                assert_relative_eq!(analytic[i][c], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_kill_affine_fields() {
        let mesh = shapes::icosphere(1);
        let l = compress(mesh.num_vertices(), &cotan_laplacian(&mesh));
        for row in &l {
            assert!(row.values().sum::<f64>().abs() < 1e-12);
        }
        // a translated copy has zero displacement Laplacian
        let moved: Vec<Point> = mesh.vertices().iter().map(|p| p + Vector::new(0.3, -0.1, 0.2)).collect();
        assert!(displacement_laplacian_norm(&mesh.with_vertices(moved).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_mu_is_identity() {
        let mesh = shapes::icosphere(1);
        let g: Vec<Vector> = (0..mesh.num_vertices()).map(|i| Vector::new(i as f64, 1.0, -2.0)).collect();
        for order in [1, 2] {
            let p = Preconditioner::new(&mesh, 0.0, order).unwrap();
            let out = p.apply(&g).unwrap();
            for (a, b) in out.iter().zip(&g) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn preconditioning_smooths() {
        let mesh = shapes::icosphere(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g: Vec<Vector> = (0..mesh.num_vertices())
            .map(|_| Vector::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let rough = |d: &[Vector]| {
            let moved: Vec<Point> = mesh.vertices().iter().zip(d).map(|(p, d)| p + d).collect();
            let m = mesh.with_vertices(moved).unwrap();
            let scale = d.iter().map(|x| x.norm()).sum::<f64>();
            displacement_laplacian_norm(&m) / scale
        };
        let l1 = Preconditioner::new(&mesh, 10.0, 1).unwrap().apply(&g).unwrap();
        let l2 = Preconditioner::new(&mesh, 10.0, 2).unwrap().apply(&g).unwrap();
        assert!(rough(&l1) < rough(&g));
        assert!(rough(&l2) < rough(&l1));
    }

    #[test]
    fn baselines_run_and_record() {
        let params = HyperParams {
            n_gradient: 2,
            n_dir: 4,
            n_path: 2,
            eval_n_dir: 4,
            ..HyperParams::default()
        };
        let mesh = shapes::icosphere(2).normalize_scale().unwrap();
        let problem = Problem::new(mesh, ReflectivitySpec::stealth(), &params).unwrap();
        for order in [0, 1, 2] {
            let run = baseline_run(&problem, &params, 1, 2, order).unwrap();
            assert!(run.failure.is_none());
            assert_eq!(run.history.len(), 3);
            assert!(run.history[2].mean_vertex_disp > 0.0);
        }
        let a = baseline_vertex_descent(&problem, &params, 1, 2).unwrap();
        let b = baseline_preconditioned(&problem, &params, 1, 2, 0);
        assert!(b.is_err());
        assert_eq!(a.history, baseline_run(&problem, &params, 1, 2, 0).unwrap().history);
    }

    #[test]
    fn strategy_labels_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.label().parse::<Strategy>().unwrap(), s);
        }
        assert!("newton".parse::<Strategy>().is_err());
    }
}
