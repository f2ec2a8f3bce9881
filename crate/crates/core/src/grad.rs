//! Gradients of the reflectivity energy with respect to per-face target
//! normals, by adjoint transport along independently sampled paths.

use rand::Rng;
use rayon::prelude::*;

use crate::energy::{
    check_inputs, face_moments, sample_face, EnergyEstimate, ReflectivitySpec, SamplingConfig,
    StreamKey,
};
use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, Vector};
use crate::rng::{substream, Purpose};
use crate::trace::phong::mirror_cosine;
use crate::trace::{eval_phong, PhongParams, PhongScene};

/// Per-face unit target normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNormals(Vec<Vector>);

impl TargetNormals {
    pub fn new(normals: Vec<Vector>) -> Result<Self> {
        for (f, n) in normals.iter().enumerate() {
            if !((n.norm() - 1.0).abs() <= 1e-9) {
                return Err(Error::Degenerate(format!("target normal {f} is not unit length")));
            }
        }
        Ok(Self(normals))
    }

    pub fn from_mesh(mesh: &Mesh) -> Result<Self> {
        Ok(Self(mesh.face_normals()?))
    }

    pub fn as_slice(&self) -> &[Vector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Vector> {
        self.0
    }

    /// Largest angle (radians) between corresponding normals.
    pub fn max_angle_to(&self, other: &[Vector]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| a.dot(b).clamp(-1.0, 1.0).acos())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for TargetNormals {
    type Output = Vector;
    fn index(&self, i: usize) -> &Vector {
        &self.0[i]
    }
}

/// Destination for per-face gradient contributions.
pub trait GradientSink {
    fn add(&mut self, face: usize, g: Vector);
}

impl GradientSink for Vec<(usize, Vector)> {
    fn add(&mut self, face: usize, g: Vector) {
        self.push((face, g));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    grads: Vec<Vector>,
    samples: Vec<u32>,
}

impl GradientBuffer {
    pub fn zeros(faces: usize) -> Self {
        Self {
            grads: vec![Vector::zeros(); faces],
            samples: vec![0; faces],
        }
    }

    pub fn as_slice(&self) -> &[Vector] {
        &self.grads
    }

    pub fn samples(&self) -> &[u32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}

impl GradientSink for GradientBuffer {
    fn add(&mut self, face: usize, g: Vector) {
        self.grads[face] += g;
        self.samples[face] += 1;
    }
}

fn tangent(normal: &Vector, g: Vector) -> Vector {
    g - normal * normal.dot(&g)
}

/// Tangent-space derivative of the Phong BRDF in the normal.
pub fn phong_normal_derivative(
    brdf: &PhongParams,
    normal: &Vector,
    w_o: &Vector,
    w_i: &Vector,
) -> Vector {
    let (co, ci) = (normal.dot(w_o), normal.dot(w_i));
    if co <= 0.0 || ci <= 0.0 || brdf.k_s == 0.0 {
        return Vector::zeros();
    }
    let c = mirror_cosine(normal, w_o, w_i);
    if c <= 0.0 {
        return Vector::zeros();
    }
    let c = c.min(1.0);
    let scale = brdf.k_s * brdf.specular_norm() * brdf.n_exp * c.powf(brdf.n_exp - 1.0);
    tangent(normal, (w_i * co + w_o * ci) * (2.0 * scale))
}

/// `f(w_o, w_i) (n . w_i)` and its tangent-space derivative in `n`.
pub fn shading_derivative(
    brdf: &PhongParams,
    normal: &Vector,
    w_o: &Vector,
    w_i: &Vector,
) -> (f64, Vector) {
    let ci = normal.dot(w_i);
    if ci <= 0.0 || normal.dot(w_o) <= 0.0 {
        return (0.0, Vector::zeros());
    }
    let f = eval_phong(brdf, normal, w_o, w_i);
    let df = phong_normal_derivative(brdf, normal, w_o, w_i);
    (f * ci, df * ci + tangent(normal, w_i * f))
}

/// Accumulates `adjoint_weight * dL/dt_j` for every face `j` the sampled
/// transport touches: the direct term at `face` plus `n_path` independent
/// bounces (their origin lobe and the directly lit hit face).
#[allow(clippy::too_many_arguments)]
pub fn radiance_adjoint<R: Rng + ?Sized, G: GradientSink>(
    scene: &PhongScene,
    shading: &[Vector],
    face: usize,
    p: &Point,
    w_o: &Vector,
    w_l: &Vector,
    adjoint_weight: f64,
    n_path: usize,
    light_visible: Option<f64>,
    rng: &mut R,
    out: &mut G,
) {
    if adjoint_weight == 0.0 {
        return;
    }
    let normal = &shading[face];
    if normal.dot(w_o) <= 0.0 {
        return;
    }
    let e = scene.emitter_radiance;
    let (value, d_direct) = shading_derivative(&scene.brdf, normal, w_o, w_l);
    if value > 0.0 {
        let v = light_visible.unwrap_or_else(|| scene.visibility(p, w_l, Some(face)));
        if v > 0.0 {
            out.add(face, d_direct * (adjoint_weight * e * v));
        }
    }
    if n_path == 0 {
        return;
    }
    let w = adjoint_weight / n_path as f64;
    for _ in 0..n_path {
        let Some(b) = scene.bounce(shading, face, p, w_o, w_l, rng) else {
            continue;
        };
        if b.incoming <= 0.0 {
            continue;
        }
        let (_, d_origin) = shading_derivative(&scene.brdf, normal, w_o, &b.direction);
        out.add(face, d_origin * (w * b.incoming / b.pdf));
        let back = -b.direction;
        let (_, d_hit) = shading_derivative(&scene.brdf, &shading[b.hit.face], &back, w_l);
        // incoming > 0 already implies the hit point sees the light
        out.add(b.hit.face, d_hit * (w * b.throughput * e));
    }
}

/// Energy estimate and its gradient in the shading normals `t`.
///
/// The primal uses `Purpose::Radiance` streams keyed by `(seed, iteration)`
/// and matches [`crate::energy::total_energy`] with the same key; adjoint
/// paths use independent `Purpose::Adjoint` streams.
pub fn energy_gradient(
    scene: &PhongScene,
    spec: &ReflectivitySpec,
    t: &TargetNormals,
    sampling: SamplingConfig,
    seed: u64,
    iteration: u64,
) -> Result<(EnergyEstimate, GradientBuffer)> {
    let shading = t.as_slice();
    check_inputs(scene, spec, shading, sampling)?;
    let key = StreamKey {
        seed,
        purpose: Purpose::Radiance,
        iteration,
    };
    let areas = scene.areas();
    let n = sampling.n_dir as f64;
    let faces: Vec<((f64, f64), Vec<(usize, Vector)>)> = (0..scene.num_faces())
        .into_par_iter()
        .map(|face| {
            let mut losses = Vec::with_capacity(sampling.n_dir);
            let mut contributions = Vec::new();
            let light_visible_known = spec.kind == crate::energy::ObjectiveKind::Stealth;
            sample_face(scene, spec, shading, face, sampling, key, |i, s| {
                losses.push(s.loss);
                let weight = areas[face] / n * s.dloss;
                if weight == 0.0 {
                    return;
                }
                let mut rng = substream(seed, Purpose::Adjoint, iteration, face as u64, i as u64);
                radiance_adjoint(
                    scene,
                    shading,
                    face,
                    &s.p,
                    &s.w_o,
                    &s.w_l,
                    weight,
                    sampling.n_path,
                    light_visible_known.then_some(1.0),
                    &mut rng,
                    &mut contributions,
                );
            })?;
            Ok((face_moments(areas[face], sampling.n_dir, &losses), contributions))
        })
        .collect::<Result<_>>()?;

    // fixed-order reduction keeps results independent of scheduling
    let mut buffer = GradientBuffer::zeros(scene.num_faces());
    let mut moments = Vec::with_capacity(faces.len());
    for (m, contributions) in faces {
        moments.push(m);
        for (f, g) in contributions {
            buffer.add(f, g);
        }
    }
    Ok((EnergyEstimate::from_moments(&moments), buffer))
}

/// `t_k <- normalize(t_k - eta (G_k + beta A_k (t_k - n_k)))`.
pub fn regularized_step(
    t: &TargetNormals,
    g: &GradientBuffer,
    reference_normals: &[Vector],
    eta: f64,
    beta: f64,
    face_areas: &[f64],
) -> Result<TargetNormals> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter("beta must be non-negative".into()));
    }
    let count = t.len();
    for (what, got) in [
        ("gradient", g.len()),
        ("reference normals", reference_normals.len()),
        ("face areas", face_areas.len()),
    ] {
        if got != count {
            return Err(Error::SizeMismatch {
                what,
                expected: count,
                got,
            });
        }
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let tk = t[k];
        let step = g.as_slice()[k] + (tk - reference_normals[k]) * (beta * face_areas[k]);
        let next = tk - step * eta;
        let norm = next.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::Degenerate(format!(
                "normal step on face {k} collapsed to zero"
            )));
        }
        out.push(next / norm);
    }
    Ok(TargetNormals(out))
}
