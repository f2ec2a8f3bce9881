//! The alternating optimization: normal-gradient steps on target normals,
//! TV filtering, ARAP vertex recovery, and the coarse-to-fine schedule with
//! an adaptive split between the face-element stages.

pub mod baseline;
pub mod history;
pub mod metrics;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::denoise::{tv_filter, TvParams};
use crate::energy::{total_energy, EnergyEstimate, ReflectivitySpec, SamplingConfig, StreamKey};
use crate::error::{Error, Result};
use crate::geom::{Mesh, Point, Vector};
use crate::grad::{energy_gradient, regularized_step, TargetNormals};
use crate::remesh::{select_and_split, SplitReport};
use crate::rng::Purpose;
use crate::stylize::{ArapSystem, ElementKind};
use crate::trace::{DirectionalBand, LightSet, PhongParams, PhongScene};

pub use history::{HistoryRow, TimingRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Normal step size.
    pub eta: f64,
    /// Soft constraint pulling targets toward the original normals.
    pub beta: f64,
    pub lambda_style: f64,
    pub tv_alpha: f64,
    /// Skips the TV filter entirely when false.
    pub denoise: bool,
    pub n_gradient: usize,
    pub n_path: usize,
    pub n_dir: usize,
    /// Light directions per face in the evaluation pass after each update.
    pub eval_n_dir: usize,
    /// Band half-angle in degrees.
    pub theta0: f64,
    pub stage_iters: [usize; 3],
    pub split_fraction: f64,
    /// Local-global iterations per vertex update.
    pub arap_iters: usize,
    /// Vertex step size of the direct-descent baselines.
    pub baseline_eta: f64,
    /// Smoothing weight of the preconditioned baselines.
    pub mu: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta: 200.0,
            beta: 0.1,
            lambda_style: 1000.0,
            tv_alpha: 250.0,
            denoise: true,
            n_gradient: 8,
            n_path: 8,
            n_dir: 16,
            eval_n_dir: 64,
            theta0: 20.0,
            stage_iters: [30, 30, 30],
            split_fraction: 0.05,
            arap_iters: 30,
            baseline_eta: 0.3,
            mu: 10.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta", self.eta),
            ("lambda_style", self.lambda_style),
            ("tv_alpha", self.tv_alpha),
            ("theta0", self.theta0),
            ("split_fraction", self.split_fraction),
            ("baseline_eta", self.baseline_eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("beta", self.beta), ("mu", self.mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        for (name, v) in [
            ("n_gradient", self.n_gradient),
            ("n_dir", self.n_dir),
            ("eval_n_dir", self.eval_n_dir),
            ("arap_iters", self.arap_iters),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
            }
        }
        if self.theta0 > 90.0 {
            return Err(Error::InvalidParameter("theta0 must not exceed 90 degrees".into()));
        }
        if self.split_fraction > 1.0 {
            return Err(Error::InvalidParameter("split_fraction must not exceed 1".into()));
        }
        Ok(())
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            n_dir: self.n_dir,
            n_path: self.n_path,
        }
    }

    pub fn tv(&self) -> TvParams {
        TvParams {
            alpha: self.tv_alpha,
            ..TvParams::default()
        }
    }

    /// The default light band with this half-angle about +z.
    pub fn band(&self) -> Result<DirectionalBand> {
        DirectionalBand::new(self.theta0.to_radians(), Vector::z())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CoarseRimSpoke,
    FineFace,
    PostSplitFace,
    Done,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::CoarseRimSpoke => "coarse_rim_spoke",
            Stage::FineFace => "fine_face",
            Stage::PostSplitFace => "post_split_face",
            Stage::Done => "done",
        }
    }

    pub fn element_kind(&self) -> ElementKind {
        match self {
            Stage::CoarseRimSpoke => ElementKind::RimSpoke,
            _ => ElementKind::FaceOnly,
        }
    }
}

/// Everything that defines an optimization apart from its schedule.
#[derive(Debug, Clone)]
pub struct Problem {
    /// Deformed and reference shapes; usually identical at the start.
    pub mesh: Mesh,
    pub brdf: PhongParams,
    pub lights: LightSet,
    pub emitter_radiance: f64,
    pub spec: ReflectivitySpec,
    /// Fixed vertex positions.
    pub constraints: Vec<(usize, Point)>,
}

impl Problem {
    /// Default Phong material, unit emitter, and the band from `params`.
    pub fn new(mesh: Mesh, spec: ReflectivitySpec, params: &HyperParams) -> Result<Self> {
        Ok(Self {
            mesh,
            brdf: PhongParams::default(),
            lights: LightSet::Band(params.band()?),
            emitter_radiance: 1.0,
            spec,
            constraints: Vec::new(),
        })
    }

    pub fn scene(&self) -> Result<PhongScene> {
        PhongScene::new(self.mesh.clone(), self.brdf, self.lights, self.emitter_radiance)
    }
}

/// Returned by hooks to continue or stop the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Terminate,
}

/// Observation and steering points of [`run_schedule`].
pub trait Hooks {
    /// Runs before each vertex update. May change parameters, the element
    /// kind or request a split through the state's setters.
    fn before_update(&mut self, _state: &mut OptimizerState) -> Result<Control> {
        Ok(Control::Continue)
    }

    /// Runs after each vertex update and after topology changes.
    fn after_update(&mut self, _state: &OptimizerState) -> Result<()> {
        Ok(())
    }
}

/// Hooks that observe nothing.
pub struct NoHooks;

impl Hooks for NoHooks {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Completed,
    Terminated,
}

pub struct OptimizerState {
    scene: PhongScene,
    spec: ReflectivitySpec,
    constraints: Vec<(usize, Point)>,
    params: HyperParams,
    seed: u64,
    system: ArapSystem,
    reference_normals: Vec<Vector>,
    t: TargetNormals,
    stage: Stage,
    element_override: Option<ElementKind>,
    updates: usize,
    gradient_steps: u64,
    topology_revision: u64,
    split_requested: bool,
    evaluation: EnergyEstimate,
    history: Vec<HistoryRow>,
    timings: Vec<TimingRow>,
    splits: Vec<SplitReport>,
    started: Instant,
}

impl std::fmt::Debug for OptimizerState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptimizerState")
            .field("stage", &self.stage)
            .field("updates", &self.updates)
            .field("faces", &self.scene.num_faces())
            .finish_non_exhaustive()
    }
}

impl OptimizerState {
    /// Prepares the first stage and records the initial evaluation as
    /// history row 0.
    pub fn new(problem: Problem, params: HyperParams, seed: u64) -> Result<Self> {
        params.validate()?;
        problem.spec.validate()?;
        let stage = Stage::CoarseRimSpoke;
        let scene = problem.scene()?;
        let system = ArapSystem::build(
            scene.mesh(),
            stage.element_kind(),
            params.lambda_style,
            &problem.constraints,
        )?;
        let reference_normals = scene.mesh().reference_face_normals()?;
        let t = TargetNormals::new(scene.normals().to_vec())?;
        let evaluation = evaluate(&scene, &problem.spec, &params, seed)?;
        let mut state = Self {
            scene,
            spec: problem.spec,
            constraints: problem.constraints,
            params,
            seed,
            system,
            reference_normals,
            t,
            stage,
            element_override: None,
            updates: 0,
            gradient_steps: 0,
            topology_revision: 0,
            split_requested: false,
            evaluation,
            history: Vec::new(),
            timings: Vec::new(),
            splits: Vec::new(),
            started: Instant::now(),
        };
        state.push_row();
        Ok(state)
    }

    pub fn mesh(&self) -> &Mesh {
        self.scene.mesh()
    }

    pub fn scene(&self) -> &PhongScene {
        &self.scene
    }

    pub fn spec(&self) -> &ReflectivitySpec {
        &self.spec
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn targets(&self) -> &TargetNormals {
        &self.t
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Vertex updates performed so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Bumped by every topology change.
    pub fn topology_revision(&self) -> u64 {
        self.topology_revision
    }

    pub fn element_kind(&self) -> ElementKind {
        self.system.kind()
    }

    /// The latest evaluation of the current shape.
    pub fn evaluation(&self) -> &EnergyEstimate {
        &self.evaluation
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn timings(&self) -> &[TimingRow] {
        &self.timings
    }

    pub fn splits(&self) -> &[SplitReport] {
        &self.splits
    }

    pub fn into_mesh(self) -> Mesh {
        self.scene.into_mesh()
    }

    /// Replaces the hyperparameters. Takes effect at the next gradient step.
    pub fn set_params(&mut self, params: HyperParams) -> Result<()> {
        params.validate()?;
        if params.lambda_style != self.params.lambda_style {
            self.params = params;
            return self.rebuild_system();
        }
        self.params = params;
        Ok(())
    }

    /// Overrides the element kind of the current stage. The override is
    /// cleared at the next stage transition.
    pub fn set_element_kind(&mut self, kind: ElementKind) -> Result<()> {
        self.element_override = Some(kind);
        self.rebuild_system()
    }

    /// Queues a split batch before the next vertex update.
    pub fn request_split(&mut self) {
        self.split_requested = true;
    }

    fn desired_kind(&self) -> ElementKind {
        self.element_override.unwrap_or(self.stage.element_kind())
    }

    fn rebuild_system(&mut self) -> Result<()> {
        let kind = self.desired_kind();
        if kind != self.system.kind()
            || self.system.lambda() != self.params.lambda_style
            || self.system.num_vertices() != self.mesh().num_vertices()
        {
            self.system =
                ArapSystem::build(self.mesh(), kind, self.params.lambda_style, &self.constraints)?;
        }
        Ok(())
    }

    fn enter_stage(&mut self, stage: Stage) -> Result<()> {
        self.stage = stage;
        self.element_override = None;
        if stage != Stage::Done {
            self.rebuild_system()?;
        }
        Ok(())
    }

    fn push_row(&mut self) {
        let mesh = self.scene.mesh();
        self.history.push(HistoryRow {
            iteration: self.updates,
            stage: self.stage.label().to_string(),
            e_refl: self.evaluation.total,
            std_error: self.evaluation.std_error,
            mean_vertex_disp: metrics::mean_vertex_displacement(mesh),
            mean_adj_normal_diff: metrics::mean_adjacent_normal_difference(mesh, self.scene.normals()),
            cell_area_diff: metrics::relative_cell_area_difference(mesh),
            face_count: mesh.num_faces(),
        });
    }

    /// One pass of the inner loop: `n_gradient` regularized normal steps,
    /// one TV filter, one ARAP solve and the reinitialization of the
    /// targets to the new face normals. Appends one history row.
    pub fn vertex_update(&mut self) -> Result<()> {
        let p = self.params;
        let t_start = Instant::now();
        let mut t = TargetNormals::new(self.scene.normals().to_vec())?;
        let mut grad_single = 0.0;
        for g in 0..p.n_gradient {
            let t0 = Instant::now();
            let (_, grad) = energy_gradient(
                &self.scene,
                &self.spec,
                &t,
                p.sampling(),
                self.seed,
                self.gradient_steps,
            )?;
            if g == 0 {
                grad_single = ms(t0);
            }
            self.gradient_steps += 1;
            t = regularized_step(
                &t,
                &grad,
                &self.reference_normals,
                p.eta,
                p.beta,
                self.scene.areas(),
            )?;
        }
        let grad_total = ms(t_start);

        let t0 = Instant::now();
        if p.denoise {
            t = TargetNormals::new(tv_filter(self.scene.mesh(), t.as_slice(), &p.tv())?)?;
        }
        let denoise_ms = ms(t0);

        let t0 = Instant::now();
        let solution = self
            .system
            .solve(t.as_slice(), self.scene.mesh().vertices(), p.arap_iters)?;
        let mesh = self.scene.mesh().with_vertices(solution.vertices)?;
        self.scene = self.scene.rebuild(mesh)?;
        self.t = TargetNormals::new(self.scene.normals().to_vec())?;
        let vertex_ms = ms(t0);

        let t0 = Instant::now();
        self.evaluation = evaluate(&self.scene, &self.spec, &self.params, self.seed)?;
        let eval_ms = ms(t0);

        self.updates += 1;
        self.push_row();
        self.timings.push(TimingRow {
            iteration: self.updates,
            face_count: self.scene.num_faces(),
            grad_single_ms: grad_single,
            grad_total_ms: grad_total,
            denoise_ms,
            vertex_ms,
            eval_ms,
            total_ms: grad_total + denoise_ms + vertex_ms,
            wall_ms: ms(self.started),
        });
        Ok(())
    }

    /// Splits the top `split_fraction` of edges by the latest per-face
    /// energies on both shapes and rebuilds everything topology-dependent.
    pub fn split(&mut self) -> Result<&SplitReport> {
        let (mesh, report) = select_and_split(
            self.scene.mesh(),
            &self.evaluation.per_face,
            self.params.split_fraction,
        )?;
        if report.num_split() > 0 {
            self.scene = self.scene.rebuild(mesh)?;
            self.reference_normals = self.scene.mesh().reference_face_normals()?;
            self.t = TargetNormals::new(self.scene.normals().to_vec())?;
            self.system = ArapSystem::build(
                self.scene.mesh(),
                self.desired_kind(),
                self.params.lambda_style,
                &self.constraints,
            )?;
            self.evaluation = evaluate(&self.scene, &self.spec, &self.params, self.seed)?;
            self.topology_revision += 1;
        }
        tracing::info!(
            split = report.num_split(),
            selected = report.selected.len(),
            faces = self.scene.num_faces(),
            "edge split batch"
        );
        self.splits.push(report);
        Ok(self.splits.last().expect("just pushed"))
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Energy of the current shape with its geometric normals. Every
/// evaluation reuses the same streams, so consecutive values differ only
/// through the geometry.
pub fn evaluate(
    scene: &PhongScene,
    spec: &ReflectivitySpec,
    params: &HyperParams,
    seed: u64,
) -> Result<EnergyEstimate> {
    total_energy(
        scene,
        spec,
        scene.normals(),
        SamplingConfig {
            n_dir: params.eval_n_dir,
            n_path: params.n_path,
        },
        StreamKey {
            seed,
            purpose: Purpose::Evaluate,
            iteration: 0,
        },
    )
}

/// Runs the three-stage schedule: rim-spoke updates, face-element updates,
/// one split batch, then face-element updates on the refined mesh.
pub fn run_schedule(state: &mut OptimizerState, hooks: &mut dyn Hooks) -> Result<RunOutcome> {
    let stages = [Stage::CoarseRimSpoke, Stage::FineFace, Stage::PostSplitFace];
    for stage in stages {
        state.enter_stage(stage)?;
        if stage == Stage::PostSplitFace && state.params.stage_iters[2] > 0 {
            state.split()?;
            hooks.after_update(state)?;
        }
        // read live so steering can lengthen or cut a stage
        let mut done = 0;
        while done < state.params.stage_iters[stage_index(stage)] {
            if hooks.before_update(state)? == Control::Terminate {
                return Ok(RunOutcome::Terminated);
            }
            if state.split_requested {
                state.split_requested = false;
                state.split()?;
            }
            state.vertex_update()?;
            done += 1;
            tracing::debug!(
                stage = stage.label(),
                update = state.updates,
                energy = state.evaluation.total,
                "vertex update"
            );
            hooks.after_update(state)?;
        }
    }
    state.enter_stage(Stage::Done)?;
    hooks.after_update(state)?;
    Ok(RunOutcome::Completed)
}

fn stage_index(stage: Stage) -> usize {
    match stage {
        Stage::CoarseRimSpoke => 0,
        Stage::FineFace => 1,
        _ => 2,
    }
}
