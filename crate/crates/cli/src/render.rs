//! Retroreflection heatmaps: an orthographic view with the light at the
//! camera, so each pixel shows the radiance sent straight back.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use stealth_core::rng::{stream, Purpose};
use stealth_core::trace::RaySample;
use stealth_core::{PhongScene, Vector};

use crate::config::RenderConfig;

const BACKGROUND: Rgb<u8> = Rgb([24, 24, 28]);

/// Retro radiance per pixel in row-major order, `None` where the ray
/// misses.
pub fn retro_radiance(scene: &PhongScene, cfg: &RenderConfig, seed: u64) -> Vec<Option<f64>> {
    let view = Vector::new(cfg.view[0], cfg.view[1], cfg.view[2]).normalize();
    let mut up = Vector::new(cfg.up[0], cfg.up[1], cfg.up[2]);
    if view.cross(&up).norm() < 1e-6 {
        up = if view.x.abs() < 0.9 { Vector::x() } else { Vector::y() };
    }
    let right = up.cross(&view).normalize();
    let up = view.cross(&right);

    let verts = scene.mesh().vertices();
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in verts {
        let c = [p.coords.dot(&right), p.coords.dot(&up), p.coords.dot(&view)];
        for k in 0..3 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let aspect = w as f64 / h as f64;
    let mut half_h = 0.55 * (hi[1] - lo[1]).max((hi[0] - lo[0]) / aspect);
    if half_h <= 0.0 {
        half_h = 1.0;
    }
    let half_w = half_h * aspect;
    let (cx, cy) = (0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]));
    let depth = hi[2] + 1.0;

    (0..w * h)
        .into_par_iter()
        .map(|pixel| {
            let (i, j) = (pixel % w, pixel / w);
            let x = cx + half_w * (2.0 * (i as f64 + 0.5) / w as f64 - 1.0);
            let y = cy + half_h * (1.0 - 2.0 * (j as f64 + 0.5) / h as f64);
            let origin = stealth_core::Point::from(right * x + up * y + view * depth);
            let hit = scene.intersect(&RaySample {
                origin,
                direction: -view,
                face_skip: None,
            })?;
            let mut rng = stream(seed, Purpose::Misc, 0, pixel as u64);
            Some(scene.radiance(
                scene.normals(),
                hit.face,
                &hit.point,
                &view,
                &view,
                cfg.n_path,
                None,
                &mut rng,
            ))
        })
        .collect()
}

/// Maps radiance to a black-red-yellow-white ramp on a square-root scale,
/// normalized by `peak` (the image maximum when `None`).
pub fn tone_map(values: &[Option<f64>], width: u32, height: u32, peak: Option<f64>) -> RgbImage {
    let peak = peak
        .unwrap_or_else(|| values.iter().flatten().fold(0.0, |m: f64, &v| m.max(v)))
        .max(1e-12);
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    for (k, v) in values.iter().enumerate() {
        if let Some(v) = v {
            let t = (v / peak).clamp(0.0, 1.0).sqrt();
            img.put_pixel(k as u32 % width, k as u32 / width, ramp(t));
        }
    }
    img
}

fn ramp(t: f64) -> Rgb<u8> {
    let stops = [
        (0.0, [0.0, 0.0, 0.0]),
        (0.35, [0.7, 0.05, 0.1]),
        (0.7, [1.0, 0.75, 0.0]),
        (1.0, [1.0, 1.0, 1.0]),
    ];
    let k = stops.iter().rposition(|s| s.0 <= t).unwrap_or(0).min(stops.len() - 2);
    let (t0, a) = stops[k];
    let (t1, b) = stops[k + 1];
    let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let c = |i: usize| ((a[i] + (b[i] - a[i]) * s) * 255.0).round() as u8;
    Rgb([c(0), c(1), c(2)])
}
