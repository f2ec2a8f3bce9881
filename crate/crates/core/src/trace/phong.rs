//! Normalized Phong BRDF with Lafortune–Willems importance sampling.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhongParams {
    pub k_d: f64,
    pub k_s: f64,
    pub n_exp: f64,
}

impl Default for PhongParams {
    fn default() -> Self {
        Self {
            k_d: 0.1,
            k_s: 0.9,
            n_exp: 30.0,
        }
    }
}

impl PhongParams {
    pub fn new(k_d: f64, k_s: f64, n_exp: f64) -> Result<Self> {
        let p = Self { k_d, k_s, n_exp };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_d >= 0.0 && self.k_s >= 0.0) {
            return Err(Error::InvalidParameter("k_d and k_s must be non-negative".into()));
        }
        if self.k_d + self.k_s > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter("k_d + k_s must not exceed 1".into()));
        }
        if !(self.n_exp > 0.0 && self.n_exp.is_finite()) {
            return Err(Error::InvalidParameter("n_exp must be positive".into()));
        }
        Ok(())
    }

    /// Peak normalization of the specular lobe, `(n + 2) / 2π`.
    pub fn specular_norm(&self) -> f64 {
        (self.n_exp + 2.0) / (2.0 * PI)
    }
}

/// Cosine between `w_i` and the mirror of `w_o` about `normal`, written
/// symmetrically so swapping the two directions gives the same bits.
#[inline]
pub fn mirror_cosine(normal: &Vector, w_o: &Vector, w_i: &Vector) -> f64 {
    2.0 * (normal.dot(w_o) * normal.dot(w_i)) - w_o.dot(w_i)
}

pub fn eval_phong(brdf: &PhongParams, normal: &Vector, w_o: &Vector, w_i: &Vector) -> f64 {
    if normal.dot(w_o) <= 0.0 || normal.dot(w_i) <= 0.0 {
        return 0.0;
    }
    let c = mirror_cosine(normal, w_o, w_i).clamp(0.0, 1.0);
    brdf.k_d / PI + brdf.k_s * brdf.specular_norm() * c.powf(brdf.n_exp)
}

#[derive(Debug, Clone, Copy)]
pub struct BrdfSample {
    pub direction: Vector,
    pub pdf: f64,
}

/// Orthonormal frame `(t, b)` completing the unit vector `n`.
pub fn tangent_frame(n: &Vector) -> (Vector, Vector) {
    // Duff et al. branchless construction
    let sign = 1f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    (
        Vector::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
        Vector::new(b, sign + n.y * n.y * a, -n.y),
    )
}

fn lobe_weights(brdf: &PhongParams) -> (f64, f64) {
    let total = brdf.k_d + brdf.k_s;
    if total <= 0.0 {
        (1.0, 0.0)
    } else {
        (brdf.k_d / total, brdf.k_s / total)
    }
}

/// Mixture density of [`sample_phong`] for direction `w_i`.
pub fn pdf_phong(brdf: &PhongParams, normal: &Vector, w_o: &Vector, w_i: &Vector) -> f64 {
    let (p_d, p_s) = lobe_weights(brdf);
    let diffuse = normal.dot(w_i).max(0.0) / PI;
    let c = mirror_cosine(normal, w_o, w_i).clamp(0.0, 1.0);
    let specular = (brdf.n_exp + 1.0) / (2.0 * PI) * c.powf(brdf.n_exp);
    p_d * diffuse + p_s * specular
}

/// Draws an incident direction. Directions below the surface are returned
/// as-is; [`eval_phong`] gives them zero throughput.
pub fn sample_phong<R: Rng + ?Sized>(
    brdf: &PhongParams,
    normal: &Vector,
    w_o: &Vector,
    rng: &mut R,
) -> BrdfSample {
    let (p_d, _) = lobe_weights(brdf);
    let u0: f64 = rng.random();
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let phi = 2.0 * PI * u2;
    let direction = if u0 < p_d {
        let (t, b) = tangent_frame(normal);
        let r = u1.sqrt();
        let z = (1.0 - u1).max(0.0).sqrt();
        t * (r * phi.cos()) + b * (r * phi.sin()) + normal * z
    } else {
        let mirror = (normal * (2.0 * normal.dot(w_o)) - w_o).normalize();
        let (t, b) = tangent_frame(&mirror);
        let cos_a = u1.powf(1.0 / (brdf.n_exp + 1.0));
        let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
        t * (sin_a * phi.cos()) + b * (sin_a * phi.sin()) + mirror * cos_a
    };
    let direction = direction.normalize();
    BrdfSample {
        direction,
        pdf: pdf_phong(brdf, normal, w_o, &direction),
    }
}
