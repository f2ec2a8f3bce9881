//! Acceptance criteria A1–A11. Runs every criterion in sequence (timings
//! must not compete with other work) and prints one line per criterion.
//! Failures exit non-zero only when `STEALTH_ACCEPTANCE_STRICT=1`. Pass ids
//! such as `A5` to run a subset.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use stealth_core::energy::{total_energy, ReflectivitySpec, SamplingConfig, StreamKey, TargetGeometry};
use stealth_core::grad::{energy_gradient, TargetNormals};
use stealth_core::optimize::baseline::baseline_run;
use stealth_core::optimize::history::write_rows;
use stealth_core::optimize::{evaluate, run_schedule, HistoryRow, Hooks, HyperParams, NoHooks, OptimizerState, Problem};
use stealth_core::rng::{stream, Purpose};
use stealth_core::stylize::{ArapSystem, ElementKind};
use stealth_core::denoise::{tv_filter, TvParams};
use stealth_core::trace::phong::{eval_phong, tangent_frame};
use stealth_core::{shapes, LightSet, Mesh, PhongParams, PhongScene, Point, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn deg(x: f64) -> f64 {
    x.to_degrees()
}

fn angle(a: &Vector, b: &Vector) -> f64 {
    a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn specular_plate(light: Vector) -> PhongScene {
    let brdf = PhongParams::new(0.0, 1.0, 30.0).unwrap();
    PhongScene::new(shapes::plate(), brdf, LightSet::fixed(light).unwrap(), 1.0).unwrap()
}

/// Mean and standard error of `n` radiance samples at random plate points.
fn plate_retro_estimate(incidence: f64, n: usize) -> (f64, f64) {
    let w = Vector::new(incidence.sin(), 0.0, incidence.cos());
    let scene = specular_plate(w);
    let shading = scene.normals().to_vec();
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = stream(1, Purpose::Misc, 0, i as u64);
            let face = rng.random_range(0..2);
            let p = scene.sample_point(face, &mut rng);
            scene.radiance(&shading, face, &p, &w, &w, 8, None, &mut rng)
        })
        .collect();
    let m = mean(&samples);
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (m, (var / n as f64).sqrt())
}

fn a1() -> Outcome {
    let start = Instant::now();
    let peak = 32.0 / (2.0 * PI);
    let (l0, s0) = plate_retro_estimate(0.0, 2000);
    let a = 20f64.to_radians();
    // mirror cosine cos(2a), lobe normalization (n+2)/2pi, cos a foreshortening
    let oblique = (2.0 * a).cos().powi(30) * a.cos() * peak;
    let (l20, s20) = plate_retro_estimate(a, 2000);
    let secs = start.elapsed().as_secs_f64();
    let within = |l: f64, s: f64, x: f64| (l - x).abs() <= 3.0 * s + 1e-12 * x;
    let pass = within(l0, s0, peak) && within(l20, s20, oblique) && (oblique - 1.61e-3).abs() < 0.005e-3 && secs < 1.0;
    outcome(
        pass,
        format!(
            "L(0°) = {l0:.6} ± {s0:.1e} vs {peak:.6}; L(20°) = {l20:.4e} ± {s20:.1e} vs {oblique:.4e}; {secs:.3} s"
        ),
    )
}

fn a2() -> Outcome {
    let start = Instant::now();
    let w_l = Vector::new(0.3, 0.5, 0.8).normalize();
    let scene = PhongScene::new(shapes::octahedron(), PhongParams::default(), LightSet::Fixed(w_l), 1.0).unwrap();
    let spec = ReflectivitySpec::stealth();
    let t = TargetNormals::from_mesh(scene.mesh()).unwrap();
    let sampling = SamplingConfig::default();
    let (_, g) = energy_gradient(&scene, &spec, &t, sampling, 3, 0).unwrap();
    let key = StreamKey {
        seed: 3,
        purpose: Purpose::Radiance,
        iteration: 0,
    };
    let energy = |normals: &[Vector]| total_energy(&scene, &spec, normals, sampling, key).unwrap().total;
    let h = 1e-6;
    let fd: Vec<Vector> = (0..t.len())
        .map(|k| {
            let (u, v) = tangent_frame(&t[k]);
            let mut d = Vector::zeros();
            for axis in [u, v] {
                let mut plus = t.as_slice().to_vec();
                let mut minus = plus.clone();
                plus[k] = (t[k] + axis * h).normalize();
                minus[k] = (t[k] - axis * h).normalize();
                d += axis * ((energy(&plus) - energy(&minus)) / (2.0 * h));
            }
            d
        })
        .collect();
    // slopes this far below the largest are central-difference roundoff
    let noise_floor = 1e-6 * fd.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut active = 0;
    for (k, fd) in fd.iter().enumerate() {
        let gk = g.as_slice()[k];
        if fd.norm() < noise_floor && gk.norm() < noise_floor {
            continue;
        }
        active += 1;
        worst = worst.max((gk - fd).norm() / fd.norm().max(1e-12));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-2 && active > 0 && secs < 10.0,
        format!("max per-face relative error {worst:.2e} over {active} lit faces; {secs:.2} s"),
    )
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vector::new(r * phi.cos(), r * phi.sin(), z)
}

fn a3() -> Outcome {
    let brdf = PhongParams::default();
    let mut rng = stream(5, Purpose::Misc, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = random_unit(&mut rng);
        let a = random_unit(&mut rng);
        let b = random_unit(&mut rng);
        let n_exp = rng.random_range(1.0..200.0);
        let p = PhongParams { n_exp, ..brdf };
        worst = worst.max((eval_phong(&p, &n, &a, &b) - eval_phong(&p, &n, &b, &a)).abs());
    }
    // uniform hemisphere sampling, independent of the BRDF sampler
    let n = Vector::z();
    let samples = 200_000;
    let mut furnace_ok = true;
    let mut highest: f64 = 0.0;
    for (k, elevation) in [90.0f64, 60.0, 30.0, 5.0].iter().enumerate() {
        let e = elevation.to_radians();
        let w_o = Vector::new(e.cos(), 0.0, e.sin());
        let mut rng = stream(6, Purpose::Misc, 0, k as u64);
        let values: Vec<f64> = (0..samples)
            .map(|_| {
                let z: f64 = rng.random();
                let phi = 2.0 * PI * rng.random::<f64>();
                let r = (1.0 - z * z).sqrt();
                let w_i = Vector::new(r * phi.cos(), r * phi.sin(), z);
                eval_phong(&brdf, &n, &w_o, &w_i) * z * 2.0 * PI
            })
            .collect();
        let m = mean(&values);
        let sd = (values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples as f64 - 1.0)).sqrt();
        let sigma = sd / (samples as f64).sqrt();
        highest = highest.max(m);
        furnace_ok &= m <= brdf.k_d + brdf.k_s + 3.0 * sigma;
    }
    outcome(
        worst <= 1e-12 && furnace_ok,
        format!("max reciprocity gap {worst:.1e}; largest albedo estimate {highest:.4}"),
    )
}

fn perturbed_normals(mesh: &Mesh, max_deg: f64, seed: u64) -> Vec<Vector> {
    let mut rng = stream(seed, Purpose::Misc, 0, 0);
    mesh.face_normals()
        .unwrap()
        .iter()
        .map(|n| {
            let axis = Unit::new_normalize(n.cross(&random_unit(&mut rng)));
            Rotation3::from_axis_angle(&axis, rng.random_range(0.0..max_deg.to_radians())) * n
        })
        .collect()
}

fn a4() -> Outcome {
    let fixtures: Vec<(&str, Mesh)> = vec![
        ("icosphere", shapes::icosphere(2)),
        ("cube", shapes::cube(4)),
        ("blob", shapes::blob(4, 0.15)),
        ("bent_ridge", shapes::bent_ridge(10)),
        ("wall", shapes::wall(8, 8, 2.0, 2.0)),
    ];
    let mut failures = Vec::new();
    let (mut worst_identity, mut worst_constraint, mut worst_rise): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (name, raw) in &fixtures {
        let mesh = raw.normalize_scale().unwrap();
        let diag = mesh.bbox_diagonal();
        for kind in [ElementKind::RimSpoke, ElementKind::FaceOnly] {
            let sys = ArapSystem::build(&mesh, kind, 1000.0, &[]).unwrap();
            let t = perturbed_normals(&mesh, 15.0, 7);
            let out = sys.solve(&t, mesh.vertices(), 30).unwrap();
            for w in out.energies.windows(2) {
                let rise = (w[1] - w[0]) / w[0].abs().max(1e-300);
                worst_rise = worst_rise.max(rise);
                if rise > 1e-9 {
                    failures.push(format!("{name}/{kind:?} energy rose by {rise:.1e}"));
                }
            }
            let normals = mesh.face_normals().unwrap();
            let same = sys.solve(&normals, mesh.vertices(), 30).unwrap();
            let d = same
                .vertices
                .iter()
                .zip(mesh.vertices())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst_identity = worst_identity.max(d / diag);
            if d >= 1e-6 * diag {
                failures.push(format!("{name}/{kind:?} identity moved {d:.1e}"));
            }
            let n = mesh.num_vertices();
            let fixed: Vec<(usize, Point)> = [0, n / 3, n / 2, n - 1]
                .iter()
                .map(|&v| (v, mesh.vertices()[v] + Vector::new(0.01, -0.02, 0.015)))
                .collect();
            let sys = ArapSystem::build(&mesh, kind, 1000.0, &fixed).unwrap();
            let out = sys.solve(&t, mesh.vertices(), 30).unwrap();
            for (v, p) in &fixed {
                let e = (out.vertices[*v] - p).norm();
                worst_constraint = worst_constraint.max(e);
                if e > 1e-12 {
                    failures.push(format!("{name}/{kind:?} constraint off by {e:.1e}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "5 fixtures x 2 element kinds; max energy rise {worst_rise:.1e}, identity drift {worst_identity:.1e} x diag, constraint error {worst_constraint:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    )
}

fn optimize(mesh: &Mesh, spec: ReflectivitySpec, params: HyperParams, seed: u64) -> OptimizerState {
    let problem = Problem::new(mesh.normalize_scale().unwrap(), spec, &params).unwrap();
    let mut state = OptimizerState::new(problem, params, seed).unwrap();
    run_schedule(&mut state, &mut NoHooks).unwrap();
    state
}

struct FullRun {
    history: Vec<HistoryRow>,
    /// Mesh after each update, labelled with its stage.
    meshes: Vec<(String, Mesh)>,
    final_disp: f64,
    max_disp: f64,
    diag: f64,
    secs: f64,
}

#[derive(Default)]
struct Recorder(Vec<(String, Mesh)>);

impl Hooks for Recorder {
    fn after_update(&mut self, state: &OptimizerState) -> stealth_core::Result<()> {
        let stage = state.history().last().map(|r| r.stage.clone()).unwrap_or_default();
        self.0.push((stage, state.mesh().clone()));
        Ok(())
    }
}

fn full_run(mesh: &Mesh) -> FullRun {
    let start = Instant::now();
    let params = HyperParams::default();
    let problem = Problem::new(mesh.normalize_scale().unwrap(), ReflectivitySpec::stealth(), &params).unwrap();
    let mut state = OptimizerState::new(problem, params, 1).unwrap();
    let mut recorder = Recorder::default();
    run_schedule(&mut state, &mut recorder).unwrap();
    let history = state.history().to_vec();
    FullRun {
        final_disp: history.last().unwrap().mean_vertex_disp,
        max_disp: history.iter().map(|r| r.mean_vertex_disp).fold(0.0, f64::max),
        diag: state.mesh().reference_bbox_diagonal(),
        history,
        meshes: recorder.0,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn icosphere_run() -> &'static FullRun {
    static RUN: OnceLock<FullRun> = OnceLock::new();
    RUN.get_or_init(|| full_run(&shapes::icosphere(3)))
}

/// Medians of consecutive non-overlapping 5-update windows, per stage.
fn window_medians(history: &[HistoryRow]) -> Vec<(String, Vec<f64>)> {
    let mut stages: Vec<(String, Vec<f64>)> = Vec::new();
    for row in history.iter().filter(|r| r.iteration > 0) {
        match stages.last_mut() {
            Some((s, v)) if *s == row.stage => v.push(row.e_refl),
            _ => stages.push((row.stage.clone(), vec![row.e_refl])),
        }
    }
    stages
        .into_iter()
        .map(|(s, v)| (s, v.chunks_exact(5).map(median).collect()))
        .collect()
}

fn a5() -> Outcome {
    let run = icosphere_run();
    let first = run.history[0].e_refl;
    let last = run.history.last().unwrap().e_refl;
    let windows = window_medians(&run.history);
    let mut rises = Vec::new();
    for (stage, m) in &windows {
        for (i, w) in m.windows(2).enumerate() {
            if w[1] > w[0] {
                rises.push(format!("{stage} window {}: {:.4} -> {:.4}", i + 1, w[0], w[1]));
            }
        }
    }
    let ratio = last / first;
    let disp_ok = run.final_disp <= 0.1 * run.diag;
    let pass = ratio <= 0.5 && rises.is_empty() && disp_ok && run.secs < 600.0;
    outcome(
        pass,
        format!(
            "{} faces; E {first:.4} -> {last:.4} ({:.0}%); mean displacement {:.3} (max {:.3}, limit {:.3}); window medians non-increasing: {}; {:.0} s",
            run.history.last().unwrap().face_count,
            100.0 * ratio,
            run.final_disp,
            run.max_disp,
            0.1 * run.diag,
            if rises.is_empty() { "yes".to_string() } else { format!("no ({})", rises.join("; ")) },
            run.secs
        ),
    )
}

/// Stealth energy of `mesh` under the default light band, from 1024 light
/// directions per face.
fn precise_energy(mesh: &Mesh) -> f64 {
    let params = HyperParams {
        eval_n_dir: 1024,
        ..HyperParams::default()
    };
    let lights = LightSet::Band(params.band().unwrap());
    let scene = PhongScene::new(mesh.clone(), PhongParams::default(), lights, 1.0).unwrap();
    evaluate(&scene, &ReflectivitySpec::stealth(), &params, 9).unwrap().total
}

/// Median precise energy of the last 5 shapes of the fine-face stage (the
/// pre-split plateau) and of the post-split stage.
fn split_benefit(run: &FullRun) -> (f64, f64) {
    let tail = |stage: &str| {
        let shapes: Vec<&Mesh> = run.meshes.iter().filter(|(s, _)| s == stage).map(|(_, m)| m).collect();
        let energies: Vec<f64> = shapes[shapes.len().saturating_sub(5)..].iter().map(|m| precise_energy(m)).collect();
        median(&energies)
    };
    (tail("fine_face"), tail("post_split_face"))
}

fn a6() -> Outcome {
    let ridge = full_run(&shapes::bent_ridge(20));
    let (r_plateau, r_final) = split_benefit(&ridge);
    let (i_plateau, i_final) = split_benefit(icosphere_run());
    outcome(
        r_final < r_plateau && i_final < i_plateau,
        format!(
            "bent ridge {:.4e} -> {:.4e} (E0 {:.4e}); icosphere {i_plateau:.4} -> {i_final:.4}",
            r_plateau, r_final, ridge.history[0].e_refl
        ),
    )
}

fn a7() -> Outcome {
    let params = HyperParams::default();
    let mesh = shapes::icosphere(3).normalize_scale().unwrap();
    let problem = Problem::new(mesh, ReflectivitySpec::stealth(), &params).unwrap();
    let updates = 15;
    let seed = 1;
    let mut rows: Vec<(&str, f64, f64, Option<String>)> = Vec::new();
    let ours = {
        let p = HyperParams {
            stage_iters: [updates, 0, 0],
            ..params
        };
        let mut state = OptimizerState::new(problem.clone(), p, seed).unwrap();
        run_schedule(&mut state, &mut NoHooks).unwrap();
        state.history().to_vec()
    };
    let summary = |h: &[HistoryRow]| {
        let last = h.last().unwrap();
        (1.0 - last.e_refl / h[0].e_refl, last.cell_area_diff)
    };
    let (ours_red, ours_cell) = summary(&ours);
    rows.push(("ours", ours_red, ours_cell, None));
    for (label, order) in [("direct", 0), ("laplacian", 1), ("bilaplacian", 2)] {
        let run = baseline_run(&problem, &params, seed, updates, order).unwrap();
        let (red, cell) = summary(&run.history);
        rows.push((label, red, cell, run.failure));
    }
    let comparable = |red: f64| red >= 0.5 * ours_red;
    let smallest = rows[1..]
        .iter()
        .filter(|r| comparable(r.1))
        .all(|r| ours_cell < r.2);
    let direct = &rows[1];
    let pass = smallest && direct.2 >= 5.0 * ours_cell;
    let table: Vec<String> = rows
        .iter()
        .map(|(l, red, cell, fail)| {
            format!(
                "{l} reduction {:.0}% cell-area {:.3}{}",
                100.0 * red,
                cell,
                fail.as_ref().map(|f| format!(" ({f})")).unwrap_or_default()
            )
        })
        .collect();
    outcome(pass, format!("{}; direct/ours = {:.1}x", table.join(", "), direct.2 / ours_cell))
}

/// Rotates each normal by an N(0, sigma) angle about a random tangent axis.
fn noisy(normals: &[Vector], sigma_deg: f64, seed: u64) -> Vec<Vector> {
    let normal = Normal::new(0.0, sigma_deg.to_radians()).unwrap();
    normals
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let mut rng = stream(seed, Purpose::Misc, 1, k as u64);
            let (u, v) = tangent_frame(n);
            let phi = 2.0 * PI * rng.random::<f64>();
            let axis = Unit::new_normalize(u * phi.cos() + v * phi.sin());
            Rotation3::from_axis_angle(&axis, normal.sample(&mut rng)) * n
        })
        .collect()
}

fn a8() -> Outcome {
    let mesh = shapes::cube(16).normalize_scale().unwrap();
    let clean = mesh.face_normals().unwrap();
    let input = noisy(&clean, 5.0, 11);
    let input_err = mean(&clean.iter().zip(&input).map(|(a, b)| deg(angle(a, b))).collect::<Vec<_>>());

    let smooth = tv_filter(&mesh, &input, &TvParams { alpha: 250.0, ..TvParams::default() }).unwrap();
    let err = mean(&clean.iter().zip(&smooth).map(|(a, b)| deg(angle(a, b))).collect::<Vec<_>>());
    let crease: Vec<f64> = mesh
        .topology()
        .edges()
        .iter()
        .filter_map(|e| match e.faces() {
            [Some(f), Some(g)] if clean[f].dot(&clean[g]).abs() < 0.5 => Some(deg(angle(&smooth[f], &smooth[g]))),
            _ => None,
        })
        .collect();
    let crease_mean = mean(&crease);
    let crease_worst = crease.iter().map(|c| (c - 90.0).abs()).fold(0.0, f64::max);

    let light = tv_filter(&mesh, &input, &TvParams { alpha: 1000.0, ..TvParams::default() }).unwrap();
    let change = mean(&input.iter().zip(&light).map(|(a, b)| deg(angle(a, b))).collect::<Vec<_>>());

    let pass = err < 1.0 && crease_worst < 2.0 && change < 1.5;
    outcome(
        pass,
        format!(
            "{} faces, input error {input_err:.2}°; alpha 250: error {err:.2}° (< 1), crease edges {} mean {crease_mean:.2}°, worst {crease_worst:.2}° from 90 (< 2); alpha 1000: change {change:.2}° (< 1.5)",
            mesh.num_faces(),
            crease.len()
        ),
    )
}

/// Update time in ms (gradient steps, filter, vertex solve); the slowest of
/// `updates` updates.
fn update_ms(mesh: &Mesh, updates: usize) -> (usize, f64) {
    let params = HyperParams::default();
    let problem = Problem::new(mesh.normalize_scale().unwrap(), ReflectivitySpec::stealth(), &params).unwrap();
    let mut state = OptimizerState::new(problem, params, 1).unwrap();
    for _ in 0..updates {
        state.vertex_update().unwrap();
    }
    let worst = state.timings().iter().map(|t| t.total_ms).fold(0.0, f64::max);
    (mesh.num_faces(), worst)
}

fn a9() -> Outcome {
    let (f1, t1) = update_ms(&shapes::blob(9, 0.15), 3);
    let (f10, t10) = update_ms(&shapes::blob(29, 0.15), 2);
    let ratio = t10 / t1;
    let linear = f10 as f64 / f1 as f64;
    let threads = rayon::current_num_threads();
    outcome(
        t10 <= 4.0 * 2500.0 && ratio <= 2.0 * linear,
        format!(
            "{f1} faces {t1:.0} ms, {f10} faces {t10:.0} ms (limit 10000); growth {ratio:.1}x for {linear:.1}x faces (limit {:.1}x); {threads} worker thread(s)",
            2.0 * linear
        ),
    )
}

fn history_bytes(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let params = HyperParams {
            stage_iters: [3, 2, 2],
            ..HyperParams::default()
        };
        let state = optimize(&shapes::icosphere(2), ReflectivitySpec::stealth(), params, 42);
        let mut out = Vec::new();
        write_rows(&mut out, state.history()).unwrap();
        out
    })
}

fn a10() -> Outcome {
    let a = history_bytes(1);
    let b = history_bytes(1);
    let c = history_bytes(4);
    outcome(
        a == b && a == c,
        format!(
            "{} history bytes; repeat identical: {}; 1 vs 4 threads identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

/// Area-weighted radiance sent from each face toward the spec's target
/// direction, averaged over light directions; fixed streams so shapes
/// compare on common random numbers.
fn delivered_radiance(scene: &PhongScene, spec: &ReflectivitySpec) -> f64 {
    let shading = scene.normals().to_vec();
    let n_dir = 64;
    (0..scene.num_faces())
        .map(|face| {
            let mut rng = stream(77, Purpose::Misc, 2, face as u64);
            let p = scene.sample_point(face, &mut rng);
            let mut sum = 0.0;
            for _ in 0..n_dir {
                let w_l = scene.lights.sample(&mut rng);
                let w_o = spec.target_direction(&p, &w_l).unwrap();
                if scene.visibility(&p, &w_o, Some(face)) == 0.0 {
                    continue;
                }
                sum += scene.radiance(&shading, face, &p, &w_o, &w_l, 8, None, &mut rng);
            }
            scene.areas()[face] * sum / n_dir as f64
        })
        .sum()
}

fn a11() -> Outcome {
    let wall = shapes::wall(22, 22, 2.0, 2.0);
    // a sun in front of and above the wall
    let sun = LightSet::fixed(Vector::new(0.0, 1.0, 0.5).normalize()).unwrap();
    let measure = |spec: ReflectivitySpec, params: HyperParams| {
        let mut problem = Problem::new(wall.normalize_scale().unwrap(), spec, &params).unwrap();
        problem.lights = sun;
        let before = delivered_radiance(&problem.scene().unwrap(), &spec);
        let mut state = OptimizerState::new(problem, params, 1).unwrap();
        run_schedule(&mut state, &mut NoHooks).unwrap();
        (before, delivered_radiance(state.scene(), &spec))
    };
    let target = TargetGeometry::Segment(Point::new(-1.0, 4.0, 2.0), Point::new(1.0, 4.0, 2.0));
    // the reciprocal loss is three orders of magnitude above the stealth loss
    let reciprocal = HyperParams {
        eta: 1.0,
        ..HyperParams::default()
    };
    let (m0, m1) = measure(ReflectivitySpec::maximize_toward(target), reciprocal);
    let (d0, d1) = measure(ReflectivitySpec::deflect_from(Point::new(0.0, 3.0, 0.0)), HyperParams::default());
    let gain = m1 / m0;
    let drop = d0 / d1;
    outcome(
        gain >= 2.0 && drop >= 5.0,
        format!(
            "{} faces; toward target line {m0:.4} -> {m1:.4} ({gain:.2}x, need 2x); toward avoided point {d0:.4} -> {d1:.4} ({drop:.2}x lower, need 5x)",
            wall.num_faces()
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 11] = [
    ("A1", "analytic radiance oracle", a1),
    ("A2", "gradient vs finite differences", a2),
    ("A3", "BRDF reciprocity and furnace bound", a3),
    ("A4", "ARAP contract", a4),
    ("A5", "end-to-end stealth", a5),
    ("A6", "subdivision benefit", a6),
    ("A7", "baseline comparison", a7),
    ("A8", "TV denoising", a8),
    ("A9", "timing order", a9),
    ("A10", "determinism", a10),
    ("A11", "alternative energies", a11),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (id, title, _) in CRITERIA {
            println!("{id}: {title}: test");
        }
        return;
    }
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(id, _, _)| filters.is_empty() || filters.iter().any(|f| f.eq_ignore_ascii_case(id)))
        .collect();
    let mut failed = Vec::new();
    println!("\nrunning {} acceptance criteria", selected.len());
    for (id, title, f) in selected.iter().copied() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "{id:<4} {status} {title} [{:.1} s]: {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(*id);
        }
    }
    println!(
        "\nacceptance: {} passed, {} failed{}",
        selected.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    let strict = std::env::var("STEALTH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
