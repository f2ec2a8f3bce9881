//! Adaptive edge subdivision driven by reflectivity and bending.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{split_edges, EdgeRef, Mesh, SplitOutcome, Topology, Vector};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.05;

/// Sum of the energies of the faces adjacent to the edge.
pub fn refl_criterion(per_face_energy: &[f64], edge: &EdgeRef) -> f64 {
    edge.adjacent_faces().map(|f| per_face_energy[f]).sum()
}

/// Length-weighted bending of the edge's ring: sum over ring edges of
/// `|e_i| * acos(n1 . n2)`. Boundary ring edges bend nothing.
pub fn geom_criterion(mesh: &Mesh, topo: &Topology, normals: &[Vector], edge: usize) -> f64 {
    let v = mesh.vertices();
    topo.ring_edges(edge)
        .into_iter()
        .map(|r| {
            let e = topo.edge(r);
            match e.faces() {
                [Some(a), Some(b)] => {
                    let (i, j) = e.endpoints;
                    (v[i] - v[j]).norm() * normals[a].dot(&normals[b]).clamp(-1.0, 1.0).acos()
                }
                _ => 0.0,
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredEdge {
    pub a: usize,
    pub b: usize,
    pub c_refl: f64,
    pub c_geom: f64,
    pub product: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitReport {
    /// Every interior edge, in canonical order.
    pub scored: Vec<ScoredEdge>,
    /// Indices into `scored`, best first.
    pub selected: Vec<usize>,
    /// Outcome per selected edge.
    pub outcomes: Vec<SplitOutcome>,
}

#[derive(Serialize)]
struct SplitRow {
    batch: usize,
    a: usize,
    b: usize,
    c_refl: f64,
    c_geom: f64,
    product: f64,
    outcome: &'static str,
    new_vertex: Option<usize>,
}

impl SplitReport {
    pub fn num_split(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, SplitOutcome::Split { .. }))
            .count()
    }

    pub fn new_vertices(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                SplitOutcome::Split { new_vertex } => Some(*new_vertex),
                _ => None,
            })
            .collect()
    }

    /// One CSV row per selected edge. The header is written when
    /// `with_header` is set.
    pub fn write_csv<W: Write>(&self, out: W, batch: usize, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(with_header)
            .from_writer(out);
        for (&s, outcome) in self.selected.iter().zip(&self.outcomes) {
            let e = &self.scored[s];
            let (label, new_vertex) = match outcome {
                SplitOutcome::Split { new_vertex } => ("split", Some(*new_vertex)),
                SplitOutcome::Deferred => ("deferred", None),
                SplitOutcome::Boundary => ("boundary", None),
                SplitOutcome::Missing => ("missing", None),
            };
            w.serialize(SplitRow {
                batch,
                a: e.a,
                b: e.b,
                c_refl: e.c_refl,
                c_geom: e.c_geom,
                product: e.product,
                outcome: label,
                new_vertex,
            })?;
        }
        w.flush().map_err(|e| Error::io("split report", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, batch: usize) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, batch, true)
    }
}

/// Scores every interior edge.
pub fn score_edges(mesh: &Mesh, per_face_energy: &[f64]) -> Result<Vec<ScoredEdge>> {
    if per_face_energy.len() != mesh.num_faces() {
        return Err(Error::SizeMismatch {
            what: "per-face energies",
            expected: mesh.num_faces(),
            got: per_face_energy.len(),
        });
    }
    let topo = mesh.topology();
    let normals = mesh.face_normals()?;
    let interior: Vec<usize> = (0..topo.edges().len())
        .filter(|&e| topo.edge(e).is_interior())
        .collect();
    Ok(interior
        .par_iter()
        .map(|&e| {
            let edge = topo.edge(e);
            let c_refl = refl_criterion(per_face_energy, edge);
            let c_geom = geom_criterion(mesh, &topo, &normals, e);
            ScoredEdge {
                a: edge.endpoints.0,
                b: edge.endpoints.1,
                c_refl,
                c_geom,
                product: c_refl * c_geom,
            }
        })
        .collect())
}

/// Ranks interior edges by `C_refl * C_geom` and splits the top
/// `ceil(fraction * interior edges)` with a positive score. Edges made
/// stale by an earlier split in the batch are skipped, not replaced.
pub fn select_and_split(
    mesh: &Mesh,
    per_face_energy: &[f64],
    fraction: f64,
) -> Result<(Mesh, SplitReport)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(
            "split fraction must lie in (0, 1]".into(),
        ));
    }
    let scored = score_edges(mesh, per_face_energy)?;
    let budget = (fraction * scored.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].product > 0.0).collect();
    // scored is in canonical edge order, so a stable sort breaks ties by id
    order.sort_by(|&x, &y| scored[y].product.total_cmp(&scored[x].product));
    order.truncate(budget);
    let requests: Vec<(usize, usize)> = order.iter().map(|&i| (scored[i].a, scored[i].b)).collect();
    let (out, outcomes) = split_edges(mesh, &requests);
    Ok((
        out,
        SplitReport {
            scored,
            selected: order,
            outcomes,
        },
    ))
}
