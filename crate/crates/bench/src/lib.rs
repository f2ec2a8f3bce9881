//! Shared fixtures for the benchmarks.

use stealth_core::energy::ReflectivitySpec;
use stealth_core::grad::TargetNormals;
use stealth_core::optimize::{HyperParams, OptimizerState, Problem};
use stealth_core::{shapes, Mesh, PhongScene, Vector};

/// Blob with about `faces` faces (12 n^2 for the cube-based grid), scaled to
/// the working size.
pub fn blob(faces: usize) -> Mesh {
    let n = ((faces as f64 / 12.0).sqrt().round() as usize).max(1);
    shapes::blob(n, 0.15).normalize_scale().expect("blob is non-degenerate")
}

pub fn stealth_problem(mesh: Mesh) -> Problem {
    Problem::new(mesh, ReflectivitySpec::stealth(), &HyperParams::default()).expect("default problem")
}

pub fn scene(mesh: Mesh) -> PhongScene {
    stealth_problem(mesh).scene().expect("scene builds")
}

pub fn state(mesh: Mesh) -> OptimizerState {
    OptimizerState::new(stealth_problem(mesh), HyperParams::default(), 1).expect("state builds")
}

/// Face normals tilted by a fixed pseudo-random offset, as a stand-in for
/// one round of gradient steps.
pub fn tilted_normals(mesh: &Mesh) -> TargetNormals {
    let normals = mesh.face_normals().expect("non-degenerate faces");
    let tilted = normals
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let phase = k as f64 * 0.618;
            (n + Vector::new(phase.sin(), phase.cos(), (2.0 * phase).sin()) * 0.2).normalize()
        })
        .collect();
    TargetNormals::new(tilted).expect("unit normals")
}
