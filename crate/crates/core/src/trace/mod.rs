//! Forward light transport: scene, ray queries and the direct plus
//! one-bounce radiance estimator under a directional light.
//!
//! Every shading query takes a per-face normal slice. It replaces the
//! geometric normal in the BRDF and cosine factors only; rays are always
//! traced against the actual triangles.

pub mod bvh;
pub mod lights;
pub mod phong;

use rand::Rng;

pub use bvh::{Bvh, Hit};
pub use lights::{sample_band, DirectionalBand, LightSet};
pub use phong::{eval_phong, pdf_phong, sample_phong, BrdfSample, PhongParams};

use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, Vector};

/// Self-intersection offset at the normalized working scale.
pub const RAY_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub origin: Point,
    pub direction: Vector,
    pub face_skip: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PhongScene {
    mesh: Mesh,
    normals: Vec<Vector>,
    areas: Vec<f64>,
    pub brdf: PhongParams,
    pub lights: LightSet,
    pub emitter_radiance: f64,
    bvh: Bvh,
}

pub fn build_scene(
    mesh: Mesh,
    brdf: PhongParams,
    band: DirectionalBand,
    emitter_radiance: f64,
) -> Result<PhongScene> {
    PhongScene::new(mesh, brdf, LightSet::Band(band), emitter_radiance)
}

impl PhongScene {
    pub fn new(
        mesh: Mesh,
        brdf: PhongParams,
        lights: LightSet,
        emitter_radiance: f64,
    ) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        brdf.validate()?;
        if !(emitter_radiance >= 0.0 && emitter_radiance.is_finite()) {
            return Err(Error::InvalidParameter(
                "emitter radiance must be non-negative".into(),
            ));
        }
        let normals = mesh.face_normals()?;
        let areas = mesh.face_areas();
        let bvh = Bvh::build(&mesh);
        Ok(Self {
            mesh,
            normals,
            areas,
            brdf,
            lights,
            emitter_radiance,
            bvh,
        })
    }

    /// Same materials and lights around new geometry.
    pub fn rebuild(&self, mesh: Mesh) -> Result<Self> {
        Self::new(mesh, self.brdf, self.lights, self.emitter_radiance)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> Mesh {
        self.mesh
    }

    pub fn num_faces(&self) -> usize {
        self.mesh.num_faces()
    }

    /// Geometric face normals.
    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn intersect(&self, ray: &RaySample) -> Option<Hit> {
        self.bvh
            .intersect(&ray.origin, &ray.direction, RAY_EPSILON, ray.face_skip)
    }

    /// 1 if the ray from `p` along `w` escapes the mesh.
    pub fn visibility(&self, p: &Point, w: &Vector, face_skip: Option<usize>) -> f64 {
        if self.bvh.occluded(p, w, RAY_EPSILON, face_skip) {
            0.0
        } else {
            1.0
        }
    }

    /// Uniformly distributed point on a face.
    pub fn sample_point<R: Rng + ?Sized>(&self, face: usize, rng: &mut R) -> Point {
        let [a, b, c] = self.mesh.triangle(face);
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        Point::from(a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2))
    }

    /// Unshadowed direct reflection `f(w_o, w_l) cos(theta_l) E` with the
    /// given shading normal.
    pub fn direct_unshadowed(&self, normal: &Vector, w_o: &Vector, w_l: &Vector) -> f64 {
        let cos_l = normal.dot(w_l);
        if cos_l <= 0.0 {
            return 0.0;
        }
        eval_phong(&self.brdf, normal, w_o, w_l) * cos_l * self.emitter_radiance
    }

    /// Direct reflection at `p` on `face` including the shadow ray.
    pub fn direct(
        &self,
        shading: &[Vector],
        face: usize,
        p: &Point,
        w_o: &Vector,
        w_l: &Vector,
    ) -> f64 {
        let value = self.direct_unshadowed(&shading[face], w_o, w_l);
        if value == 0.0 {
            return 0.0;
        }
        value * self.visibility(p, w_l, Some(face))
    }

    /// Radiance leaving `p` toward `w_o`: deterministic direct term plus an
    /// `n_path`-sample estimate of the first indirect bounce.
    ///
    /// `light_visible` lets callers that already traced the shadow ray
    /// toward `w_l` pass the result in.
    #[allow(clippy::too_many_arguments)]
    pub fn radiance<R: Rng + ?Sized>(
        &self,
        shading: &[Vector],
        face: usize,
        p: &Point,
        w_o: &Vector,
        w_l: &Vector,
        n_path: usize,
        light_visible: Option<f64>,
        rng: &mut R,
    ) -> f64 {
        let normal = &shading[face];
        if normal.dot(w_o) <= 0.0 {
            return 0.0;
        }
        let mut direct = self.direct_unshadowed(normal, w_o, w_l);
        if direct > 0.0 {
            direct *= light_visible.unwrap_or_else(|| self.visibility(p, w_l, Some(face)));
        }
        if n_path == 0 {
            return direct;
        }
        let mut indirect = 0.0;
        for _ in 0..n_path {
            if let Some(b) = self.bounce(shading, face, p, w_o, w_l, rng) {
                indirect += b.throughput * b.incoming;
            }
        }
        direct + indirect / n_path as f64
    }

    /// One BSDF-sampled bounce from `p`; `None` when the sample carries no
    /// contribution.
    pub fn bounce<R: Rng + ?Sized>(
        &self,
        shading: &[Vector],
        face: usize,
        p: &Point,
        w_o: &Vector,
        w_l: &Vector,
        rng: &mut R,
    ) -> Option<Bounce> {
        let normal = &shading[face];
        let s = sample_phong(&self.brdf, normal, w_o, rng);
        if s.pdf <= 0.0 {
            return None;
        }
        let cos_i = normal.dot(&s.direction);
        if cos_i <= 0.0 {
            return None;
        }
        let fc = eval_phong(&self.brdf, normal, w_o, &s.direction) * cos_i;
        if fc <= 0.0 {
            return None;
        }
        let hit = self.intersect(&RaySample {
            origin: *p,
            direction: s.direction,
            face_skip: Some(face),
        })?;
        let back = -s.direction;
        let incoming = self.direct(shading, hit.face, &hit.point, &back, w_l);
        Some(Bounce {
            direction: s.direction,
            pdf: s.pdf,
            throughput: fc / s.pdf,
            hit,
            incoming,
        })
    }
}

/// A sampled indirect bounce and the direct radiance arriving along it.
#[derive(Debug, Clone, Copy)]
pub struct Bounce {
    pub direction: Vector,
    pub pdf: f64,
    /// `f cos / pdf` at the origin.
    pub throughput: f64,
    pub hit: Hit,
    /// Direct radiance leaving the hit point back toward the origin.
    pub incoming: f64,
}
