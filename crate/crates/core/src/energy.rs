//! Reflectivity objectives and their Monte Carlo estimate over a mesh.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point, Vector};
use crate::rng::{stream, substream, Purpose};
use crate::trace::PhongScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Minimize radiance sent back toward the light.
    Stealth,
    /// Send as much radiance as possible toward a target.
    MaximizeTowardTarget,
    /// Send as little radiance as possible toward a point.
    DeflectFromPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetGeometry {
    Point(Point),
    Segment(Point, Point),
    Plane { point: Point, normal: Vector },
}

impl TargetGeometry {
    pub fn closest_point(&self, p: &Point) -> Point {
        match *self {
            TargetGeometry::Point(q) => q,
            TargetGeometry::Segment(a, b) => {
                let d = b - a;
                let len2 = d.norm_squared();
                if len2 == 0.0 {
                    return a;
                }
                let s = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
                a + d * s
            }
            TargetGeometry::Plane { point, normal } => {
                let n = normal.normalize();
                p - n * (p - point).dot(&n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectivitySpec {
    pub kind: ObjectiveKind,
    pub target: Option<TargetGeometry>,
    /// Target radiance. For `MaximizeTowardTarget` a positive value selects
    /// the squared loss toward it instead of the reciprocal loss.
    pub l_star: f64,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-3;

impl Default for ReflectivitySpec {
    fn default() -> Self {
        Self::stealth()
    }
}

impl ReflectivitySpec {
    pub fn stealth() -> Self {
        Self {
            kind: ObjectiveKind::Stealth,
            target: None,
            l_star: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn maximize_toward(target: TargetGeometry) -> Self {
        Self {
            kind: ObjectiveKind::MaximizeTowardTarget,
            target: Some(target),
            l_star: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn deflect_from(point: Point) -> Self {
        Self {
            kind: ObjectiveKind::DeflectFromPoint,
            target: Some(TargetGeometry::Point(point)),
            l_star: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ObjectiveKind::Stealth => {
                if self.l_star != 0.0 {
                    return Err(Error::InvalidParameter("stealth requires L* = 0".into()));
                }
            }
            ObjectiveKind::MaximizeTowardTarget | ObjectiveKind::DeflectFromPoint => {
                if self.target.is_none() {
                    return Err(Error::InvalidParameter(
                        "this objective needs a target geometry".into(),
                    ));
                }
            }
        }
        if self.kind == ObjectiveKind::MaximizeTowardTarget && !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.l_star >= 0.0 && self.l_star.is_finite()) {
            return Err(Error::InvalidParameter("L* must be non-negative".into()));
        }
        Ok(())
    }

    /// The outgoing direction whose radiance the objective measures at `p`.
    pub fn target_direction(&self, p: &Point, w_l: &Vector) -> Result<Vector> {
        match (self.kind, self.target) {
            (ObjectiveKind::Stealth, _) | (_, None) => Ok(*w_l),
            (_, Some(target)) => {
                let d = target.closest_point(p) - p;
                let dist = d.norm();
                if dist < 1e-9 {
                    return Err(Error::CoincidentTarget(dist));
                }
                Ok(d / dist)
            }
        }
    }

    /// Loss at radiance `l` and its derivative in `l`.
    pub fn pointwise_loss(&self, l: f64) -> (f64, f64) {
        match self.kind {
            ObjectiveKind::MaximizeTowardTarget if self.l_star == 0.0 => {
                let s = 1.0 / (l + self.epsilon);
                (s, -s * s)
            }
            _ => {
                let d = l - self.l_star;
                (0.5 * d * d, d)
            }
        }
    }
}

/// Monte Carlo budget per face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    pub n_dir: usize,
    pub n_path: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { n_dir: 16, n_path: 8 }
    }
}

/// Identifies the random streams of one estimation pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub total: f64,
    pub per_face: Vec<f64>,
    /// Standard error of `total` from the per-face sample variances.
    pub std_error: f64,
}

/// One light direction's contribution at a face's sample point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DirectionSample {
    pub p: Point,
    pub w_l: Vector,
    pub w_o: Vector,
    pub loss: f64,
    pub dloss: f64,
}

/// Draws the sample point and light directions for `face`, then evaluates
/// every visible direction. Occluded directions are skipped: their
/// integrand vanishes. Path draws come from a per-direction substream so
/// changes in shading never shift the point or light samples.
pub(crate) fn sample_face(
    scene: &PhongScene,
    spec: &ReflectivitySpec,
    shading: &[Vector],
    face: usize,
    sampling: SamplingConfig,
    key: StreamKey,
    mut visit: impl FnMut(usize, DirectionSample),
) -> Result<()> {
    let mut rng = stream(key.seed, key.purpose, key.iteration, face as u64);
    let p = scene.sample_point(face, &mut rng);
    let lights: Vec<Vector> = (0..sampling.n_dir)
        .map(|_| scene.lights.sample(&mut rng))
        .collect();
    for (i, w_l) in lights.into_iter().enumerate() {
        let w_o = spec.target_direction(&p, &w_l)?;
        let v = scene.visibility(&p, &w_o, Some(face));
        if v == 0.0 {
            continue;
        }
        let light_visible = (spec.kind == ObjectiveKind::Stealth).then_some(v);
        let mut paths = substream(key.seed, key.purpose, key.iteration, face as u64, i as u64);
        let radiance = scene.radiance(
            shading,
            face,
            &p,
            &w_o,
            &w_l,
            sampling.n_path,
            light_visible,
            &mut paths,
        );
        let (loss, dloss) = spec.pointwise_loss(radiance);
        visit(
            i,
            DirectionSample {
                p,
                w_l,
                w_o,
                loss,
                dloss,
            },
        );
    }
    Ok(())
}

pub(crate) fn check_inputs(
    scene: &PhongScene,
    spec: &ReflectivitySpec,
    shading: &[Vector],
    sampling: SamplingConfig,
) -> Result<()> {
    spec.validate()?;
    if sampling.n_dir == 0 {
        return Err(Error::InvalidParameter(
            "at least one light direction per face is required".into(),
        ));
    }
    if shading.len() != scene.num_faces() {
        return Err(Error::SizeMismatch {
            what: "shading normals",
            expected: scene.num_faces(),
            got: shading.len(),
        });
    }
    Ok(())
}

/// Per-face accumulation of `A_k / N * loss * V` plus the sample variance.
pub(crate) fn face_moments(area: f64, n_dir: usize, losses: &[f64]) -> (f64, f64) {
    let n = n_dir as f64;
    // occluded directions contribute exact zeros
    let sum: f64 = losses.iter().sum();
    let mean = sum / n;
    let var = if n_dir > 1 {
        let sq: f64 = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
            + (n_dir - losses.len()) as f64 * mean * mean;
        sq / (n - 1.0)
    } else {
        0.0
    };
    (area * mean, area * area * var / n)
}

/// Estimates the energy with shading normals `shading` (usually the
/// geometric normals).
pub fn total_energy(
    scene: &PhongScene,
    spec: &ReflectivitySpec,
    shading: &[Vector],
    sampling: SamplingConfig,
    key: StreamKey,
) -> Result<EnergyEstimate> {
    check_inputs(scene, spec, shading, sampling)?;
    let areas = scene.areas();
    let moments: Vec<(f64, f64)> = (0..scene.num_faces())
        .into_par_iter()
        .map(|face| {
            let mut losses = Vec::with_capacity(sampling.n_dir);
            sample_face(scene, spec, shading, face, sampling, key, |_, s| {
                losses.push(s.loss)
            })?;
            Ok(face_moments(areas[face], sampling.n_dir, &losses))
        })
        .collect::<Result<_>>()?;
    Ok(EnergyEstimate::from_moments(&moments))
}

impl EnergyEstimate {
    pub(crate) fn from_moments(moments: &[(f64, f64)]) -> Self {
        let per_face: Vec<f64> = moments.iter().map(|m| m.0).collect();
        let total = per_face.iter().sum();
        let var: f64 = moments.iter().map(|m| m.1).sum();
        Self {
            total,
            per_face,
            std_error: var.sqrt(),
        }
    }
}
