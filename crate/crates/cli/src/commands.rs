//! The batch commands.

use std::fmt;
use std::path::{Path, PathBuf};

use stealth_core::geom::write_obj;
use stealth_core::optimize::baseline::{baseline_run, Strategy};
use stealth_core::optimize::history::save_rows;
use stealth_core::optimize::{
    evaluate as evaluate_energy, run_schedule, Control, HistoryRow, Hooks, HyperParams, NoHooks,
    OptimizerState, Stage,
};
use stealth_core::{shapes, Mesh, PhongScene};

use crate::config::RunConfig;
use crate::{render, CliError, Shape};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Final mesh, history, timings and split reports of a run.
pub fn write_artifacts(state: &OptimizerState, dir: &Path) -> Result<(), CliError> {
    write_obj(state.mesh(), dir.join("final.obj"))?;
    save_rows(dir.join("history.csv"), state.history())?;
    save_rows(dir.join("timings.csv"), state.timings())?;
    let path = dir.join("splits.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?);
    if state.splits().is_empty() {
        stealth_core::remesh::SplitReport::default().write_csv(&mut out, 0, true)?;
    }
    for (batch, report) in state.splits().iter().enumerate() {
        report.write_csv(&mut out, batch, batch == 0)?;
    }
    Ok(())
}

/// Writes OBJ checkpoints every `every` vertex updates.
pub struct Checkpoints {
    dir: PathBuf,
    every: usize,
    last: Option<usize>,
}

impl Checkpoints {
    pub fn new(dir: &Path, every: usize) -> Self {
        Self {
            dir: dir.join("checkpoints"),
            every,
            last: None,
        }
    }

    pub fn write(&mut self, state: &OptimizerState) -> stealth_core::Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| stealth_core::Error::Io {
            path: self.dir.clone(),
            source: e,
        })?;
        self.last = Some(state.updates());
        write_obj(state.mesh(), self.dir.join(format!("update_{:04}.obj", state.updates())))
    }

    fn due(&self, state: &OptimizerState) -> bool {
        self.every > 0
            && state.updates() > 0
            && state.updates().is_multiple_of(self.every)
            && state.stage() != Stage::Done
            && self.last != Some(state.updates())
    }
}

impl Hooks for Checkpoints {
    fn before_update(&mut self, _: &mut OptimizerState) -> stealth_core::Result<Control> {
        Ok(Control::Continue)
    }

    fn after_update(&mut self, state: &OptimizerState) -> stealth_core::Result<()> {
        if self.due(state) {
            self.write(state)?;
        }
        Ok(())
    }
}

pub struct OptimizeSummary {
    pub dir: PathBuf,
    pub initial: f64,
    pub last: HistoryRow,
}

impl fmt::Display for OptimizeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "updates={} faces={} energy_initial={:.6e} energy_final={:.6e} mean_vertex_disp={:.4e} output={}",
            self.last.iteration,
            self.last.face_count,
            self.initial,
            self.last.e_refl,
            self.last.mean_vertex_disp,
            self.dir.display()
        )
    }
}

pub fn optimize(cfg: &RunConfig) -> Result<OptimizeSummary, CliError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    create_dir(&cfg.output)?;
    cfg.save_resolved(&cfg.output)?;
    let mut state = OptimizerState::new(problem, cfg.params, cfg.seed)?;
    let mut hooks = Checkpoints::new(&cfg.output, cfg.checkpoint_every);
    run_schedule(&mut state, &mut hooks)?;
    write_artifacts(&state, &cfg.output)?;
    let history = state.history();
    Ok(OptimizeSummary {
        dir: cfg.output.clone(),
        initial: history[0].e_refl,
        last: history[history.len() - 1].clone(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub mesh: Option<PathBuf>,
    pub n_dir: Option<usize>,
    pub render: Option<PathBuf>,
    pub per_face: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateReport {
    pub energy: f64,
    pub std_error: f64,
    pub faces: usize,
    pub n_dir: usize,
}

impl fmt::Display for EvaluateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "energy={:.9e} std_error={:.3e} faces={} n_dir={}",
            self.energy, self.std_error, self.faces, self.n_dir
        )
    }
}

pub fn evaluate(cfg: &RunConfig, opts: &EvaluateOptions) -> Result<EvaluateReport, CliError> {
    let mut params = cfg.params;
    if let Some(n) = opts.n_dir {
        if n == 0 {
            return Err(CliError::Usage("--n-dir must be at least 1".into()));
        }
        params.eval_n_dir = n;
    }
    let mut checked = cfg.clone();
    if let Some(m) = &opts.mesh {
        checked.input = m.clone();
    }
    checked.validate()?;
    let (mesh, frame) = checked.load_mesh(None)?;
    let problem = checked.problem_for(mesh, frame)?;
    let scene = problem.scene()?;
    let e = evaluate_energy(&scene, &problem.spec, &params, cfg.seed)?;
    if let Some(path) = &opts.per_face {
        write_per_face(path, &e.per_face)?;
    }
    if let Some(path) = &opts.render {
        render_png(&scene, cfg, path)?;
    }
    Ok(EvaluateReport {
        energy: e.total,
        std_error: e.std_error,
        faces: scene.num_faces(),
        n_dir: params.eval_n_dir,
    })
}

fn write_per_face(path: &Path, energies: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record(["face", "energy"]).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (k, e) in energies.iter().enumerate() {
        w.write_record([k.to_string(), format!("{e:e}")])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn render_png(scene: &PhongScene, cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let values = render::retro_radiance(scene, &cfg.render, cfg.seed);
    let img = render::tone_map(&values, cfg.render.width, cfg.render.height, None);
    img.save(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Per-strategy outcome of a comparison.
#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub mesh: Mesh,
    pub history: Vec<HistoryRow>,
    pub failure: Option<String>,
}

impl StrategyResult {
    pub fn reduction(&self) -> f64 {
        let first = self.history[0].e_refl;
        let last = self.history[self.history.len() - 1].e_refl;
        1.0 - last / first
    }

    pub fn last(&self) -> &HistoryRow {
        &self.history[self.history.len() - 1]
    }
}

/// Runs one strategy for `updates` vertex updates. Ours runs the coarse
/// stage only, so each strategy gets the same number of gradient steps.
pub fn run_strategy(
    problem: &stealth_core::optimize::Problem,
    params: &HyperParams,
    seed: u64,
    updates: usize,
    strategy: Strategy,
) -> Result<StrategyResult, CliError> {
    let run = match strategy {
        Strategy::Ours => {
            let params = HyperParams {
                stage_iters: [updates, 0, 0],
                ..*params
            };
            let mut state = OptimizerState::new(problem.clone(), params, seed)?;
            run_schedule(&mut state, &mut NoHooks)?;
            let history = state.history().to_vec();
            return Ok(StrategyResult {
                strategy,
                mesh: state.into_mesh(),
                history,
                failure: None,
            });
        }
        Strategy::Direct => baseline_run(problem, params, seed, updates, 0)?,
        Strategy::Laplacian => baseline_run(problem, params, seed, updates, 1)?,
        Strategy::BiLaplacian => baseline_run(problem, params, seed, updates, 2)?,
    };
    Ok(StrategyResult {
        strategy,
        mesh: run.mesh,
        history: run.history,
        failure: run.failure,
    })
}

pub fn compare_baselines(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let strategies = &cfg.compare.strategies;
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies selected".into()));
    }
    let seeds: Vec<u64> = strategies
        .iter()
        .map(|s| cfg.compare.seeds.get(s).copied().unwrap_or(cfg.seed))
        .collect();
    if seeds.iter().any(|&s| s != seeds[0]) {
        return Err(CliError::Usage(
            "strategies must share one seed for a comparison".into(),
        ));
    }
    let problem = cfg.problem()?;
    let dir = cfg.output.join("compare");
    create_dir(&dir)?;
    cfg.save_resolved(&cfg.output)?;
    let mut results = Vec::new();
    for &s in strategies {
        tracing::info!(strategy = s.label(), "running");
        let r = run_strategy(&problem, &cfg.params, seeds[0], cfg.compare.updates, s)?;
        if let Some(f) = &r.failure {
            tracing::warn!(strategy = s.label(), "run stopped early: {f}");
        }
        write_obj(&r.mesh, dir.join(format!("{}.obj", s.label())))?;
        save_rows(dir.join(format!("{}_history.csv", s.label())), &r.history)?;
        results.push(r);
    }
    let path = dir.join("comparison.csv");
    write_comparison(&path, &results)?;
    Ok(path)
}

/// One row per metric, one column per strategy.
pub fn write_comparison(path: &Path, results: &[StrategyResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    let mut header = vec!["metric".to_string()];
    header.extend(results.iter().map(|r| r.strategy.label().to_string()));
    w.write_record(&header).map_err(csv_err)?;
    type Metric = fn(&StrategyResult) -> String;
    let metrics: [(&str, Metric); 7] = [
        ("e_initial", |r| format!("{:e}", r.history[0].e_refl)),
        ("e_final", |r| format!("{:e}", r.last().e_refl)),
        ("reduction", |r| format!("{:e}", r.reduction())),
        ("cell_area_diff", |r| format!("{:e}", r.last().cell_area_diff)),
        ("mean_vertex_disp", |r| format!("{:e}", r.last().mean_vertex_disp)),
        ("updates", |r| r.last().iteration.to_string()),
        ("failure", |r| r.failure.clone().unwrap_or_default()),
    ];
    for (name, f) in metrics {
        let mut row = vec![name.to_string()];
        row.extend(results.iter().map(f));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn generate(shape: Shape, size: usize, output: &Path) -> Result<(), CliError> {
    let n = size.max(1);
    let mesh = match shape {
        Shape::Icosphere => {
            if size > 7 {
                return Err(CliError::Usage("icosphere level must be at most 7".into()));
            }
            shapes::icosphere(size as u32)
        }
        Shape::Cube => shapes::cube(n),
        Shape::BentRidge => shapes::bent_ridge(n),
        Shape::Plate => shapes::plate(),
        Shape::Wall => shapes::wall(n, n, 2.0, 2.0),
        Shape::Blob => shapes::blob(n, 0.15),
    };
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_obj(&mesh, output)?;
    Ok(())
}
