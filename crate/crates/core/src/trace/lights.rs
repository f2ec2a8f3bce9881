//! Directional light sets the reflectivity energy averages over.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Vector;
use crate::trace::phong::tangent_frame;

/// Directions whose elevation above the plane orthogonal to `axis` lies in
/// `[-theta0, theta0]`, all azimuths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalBand {
    pub theta0: f64,
    pub axis: Vector,
}

impl Default for DirectionalBand {
    fn default() -> Self {
        Self {
            theta0: 20f64.to_radians(),
            axis: Vector::z(),
        }
    }
}

impl DirectionalBand {
    pub fn new(theta0: f64, axis: Vector) -> Result<Self> {
        if !(theta0 > 0.0 && theta0 <= PI / 2.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "band half-angle must lie in (0, 90] degrees, got {:.3}",
                theta0.to_degrees()
            )));
        }
        let norm = axis.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::InvalidParameter("band axis must be non-zero".into()));
        }
        Ok(Self {
            theta0,
            axis: axis / norm,
        })
    }

    /// Solid angle of the band, `4π sin(theta0)`.
    pub fn solid_angle(&self) -> f64 {
        4.0 * PI * self.theta0.sin()
    }

    /// Signed elevation of `w` above the band's equator.
    pub fn elevation(&self, w: &Vector) -> f64 {
        w.dot(&self.axis).clamp(-1.0, 1.0).asin()
    }
}

/// Uniform by solid angle: the sine of the elevation is uniform.
pub fn sample_band<R: Rng + ?Sized>(band: &DirectionalBand, rng: &mut R) -> Vector {
    let s = band.theta0.sin() * (2.0 * rng.random::<f64>() - 1.0);
    let c = (1.0 - s * s).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let (t, b) = tangent_frame(&band.axis);
    (t * (c * phi.cos()) + b * (c * phi.sin()) + band.axis * s).normalize()
}

/// The light directions an energy is averaged over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSet {
    Band(DirectionalBand),
    /// A single direction (unit vector toward the light).
    Fixed(Vector),
}

impl Default for LightSet {
    fn default() -> Self {
        LightSet::Band(DirectionalBand::default())
    }
}

impl LightSet {
    pub fn fixed(direction: Vector) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::InvalidParameter("light direction must be non-zero".into()));
        }
        Ok(LightSet::Fixed(direction / norm))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match self {
            LightSet::Band(band) => sample_band(band, rng),
            LightSet::Fixed(w) => *w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn full_band_is_the_sphere() {
        let band = DirectionalBand::new(PI / 2.0, Vector::z()).unwrap();
        let mut rng = stream(5, Purpose::Misc, 0, 0);
        let n = 100_000;
        let mean = (0..n).fold(Vector::zeros(), |acc, _| acc + sample_band(&band, &mut rng)) / n as f64;
        // each component has variance 1/3, so the mean's sd is ~0.0018
        assert!(mean.norm() < 0.01, "{mean:?}");
    }

    #[test]
    fn narrow_band_support() {
        let band = DirectionalBand::default();
        let mut rng = stream(6, Purpose::Misc, 0, 0);
        for _ in 0..10_000 {
            let w = sample_band(&band, &mut rng);
            assert!((w.norm() - 1.0).abs() < 1e-12);
            assert!(band.elevation(&w).abs() <= band.theta0 + 1e-12);
        }
    }

    #[test]
    fn tilted_axis_is_respected() {
        let band = DirectionalBand::new(0.1, Vector::new(1.0, 1.0, 0.0)).unwrap();
        let mut rng = stream(7, Purpose::Misc, 0, 0);
        for _ in 0..1000 {
            let w = sample_band(&band, &mut rng);
            assert!(w.dot(&band.axis).abs() <= 0.1f64.sin() + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_bands() {
        assert!(DirectionalBand::new(0.0, Vector::z()).is_err());
        assert!(DirectionalBand::new(2.0, Vector::z()).is_err());
        assert!(DirectionalBand::new(0.3, Vector::zeros()).is_err());
        assert!(LightSet::fixed(Vector::zeros()).is_err());
    }
}
