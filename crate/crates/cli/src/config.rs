//! Run configuration: a TOML file with every default materialized on save.
//!
//! Relative paths inside the file are resolved against the file's
//! directory; the saved copy holds absolute paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stealth_core::energy::{ReflectivitySpec, TargetGeometry};
use stealth_core::geom::{load_mesh, NORMALIZED_DIAGONAL};
use stealth_core::optimize::baseline::Strategy;
use stealth_core::optimize::{HyperParams, Problem};
use stealth_core::{LightSet, Mesh, PhongParams, Point, Vector};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// OBJ file to optimize.
    pub input: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Writes an OBJ every K vertex updates; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Rescale the input to a bounding-box diagonal of 3 (targets follow).
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub brdf: PhongParams,
    #[serde(default)]
    pub light: LightConfig,
    #[serde(default)]
    pub params: HyperParams,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

fn default_seed() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    #[default]
    Stealth,
    MaximizeTowardTarget {
        target: TargetConfig,
        /// 0 selects the reciprocal loss.
        #[serde(default)]
        l_star: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    DeflectFromPoint {
        point: [f64; 3],
    },
}

fn default_epsilon() -> f64 {
    stealth_core::energy::DEFAULT_EPSILON
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Point([f64; 3]),
    Segment([[f64; 3]; 2]),
    Plane { point: [f64; 3], normal: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightConfig {
    /// Band axis; the half-angle is `params.theta0`.
    pub axis: [f64; 3],
    /// Replaces the band with one direction toward the light.
    pub fixed: Option<[f64; 3]>,
    pub emitter_radiance: f64,
}

impl Default for LightConfig {
    fn default() -> Self {
        Self {
            axis: [0.0, 0.0, 1.0],
            fixed: None,
            emitter_radiance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Direction from the object toward the camera; the light sits at the
    /// camera.
    pub view: [f64; 3],
    pub up: [f64; 3],
    /// Paths per pixel for the indirect bounce.
    pub n_path: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            view: [1.0, -0.6, 0.25],
            up: [0.0, 0.0, 1.0],
            n_path: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub updates: usize,
    pub strategies: Vec<Strategy>,
    /// Per-strategy seed overrides. A comparison needs one shared seed, so
    /// any override that differs from the others is refused.
    pub seeds: std::collections::BTreeMap<Strategy, u64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            updates: 15,
            strategies: Strategy::ALL.to_vec(),
            seeds: Default::default(),
        }
    }
}

fn vec3(a: [f64; 3]) -> Vector {
    Vector::new(a[0], a[1], a[2])
}

fn point(a: [f64; 3]) -> Point {
    Point::new(a[0], a[1], a[2])
}

/// Similarity applied by normalization; used to carry targets along.
#[derive(Debug, Clone, Copy)]
struct Similarity {
    center: Point,
    scale: f64,
}

impl Similarity {
    fn identity() -> Self {
        Self {
            center: Point::origin(),
            scale: 1.0,
        }
    }

    fn map(&self, p: [f64; 3]) -> Point {
        Point::origin() + (point(p) - self.center) * self.scale
    }
}

impl RunConfig {
    /// Reads and validates a config file. Every problem here is a usage
    /// error.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.input = absolute(base, &cfg.input);
        cfg.output = absolute(base, &cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: stealth_core::Error| CliError::Usage(e.to_string());
        if !self.input.is_file() {
            return Err(CliError::Usage(format!(
                "input mesh not found: {}",
                self.input.display()
            )));
        }
        self.params.validate().map_err(usage)?;
        self.brdf.validate().map_err(usage)?;
        self.spec(Similarity::identity()).validate().map_err(usage)?;
        if !(self.light.emitter_radiance > 0.0 && self.light.emitter_radiance.is_finite()) {
            return Err(CliError::Usage("emitter_radiance must be positive".into()));
        }
        self.lights().map_err(usage)?;
        if self.render.width == 0 || self.render.height == 0 {
            return Err(CliError::Usage("render size must be non-zero".into()));
        }
        if vec3(self.render.view).norm() < 1e-12 {
            return Err(CliError::Usage("render view direction must be non-zero".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config is always representable in TOML")
    }

    /// Writes the resolved config (defaults included) into `dir`.
    pub fn save_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| CliError::io(&path, e))
    }

    fn spec(&self, sim: Similarity) -> ReflectivitySpec {
        match &self.objective {
            ObjectiveConfig::Stealth => ReflectivitySpec::stealth(),
            ObjectiveConfig::MaximizeTowardTarget {
                target,
                l_star,
                epsilon,
            } => {
                let geometry = match *target {
                    TargetConfig::Point(p) => TargetGeometry::Point(sim.map(p)),
                    TargetConfig::Segment([a, b]) => TargetGeometry::Segment(sim.map(a), sim.map(b)),
                    TargetConfig::Plane { point, normal } => TargetGeometry::Plane {
                        point: sim.map(point),
                        normal: vec3(normal),
                    },
                };
                ReflectivitySpec {
                    l_star: *l_star,
                    epsilon: *epsilon,
                    ..ReflectivitySpec::maximize_toward(geometry)
                }
            }
            ObjectiveConfig::DeflectFromPoint { point } => ReflectivitySpec::deflect_from(sim.map(*point)),
        }
    }

    fn lights(&self) -> stealth_core::Result<LightSet> {
        match self.light.fixed {
            Some(d) => LightSet::fixed(vec3(d)),
            None => Ok(LightSet::Band(stealth_core::DirectionalBand::new(
                self.params.theta0.to_radians(),
                vec3(self.light.axis),
            )?)),
        }
    }

    /// Loads `mesh_path` (or the configured input) in the working frame.
    pub fn load_mesh(&self, mesh_path: Option<&Path>) -> Result<(Mesh, ReflectivitySpecFrame), CliError> {
        let path = mesh_path.unwrap_or(&self.input);
        if !path.is_file() {
            return Err(CliError::Usage(format!("input mesh not found: {}", path.display())));
        }
        let mesh = load_mesh(path)?;
        if !self.normalize {
            return Ok((mesh, ReflectivitySpecFrame(Similarity::identity())));
        }
        let (lo, hi) = mesh.bbox().ok_or(stealth_core::Error::EmptyMesh)?;
        let sim = Similarity {
            center: Point::from((lo.coords + hi.coords) * 0.5),
            scale: NORMALIZED_DIAGONAL / (hi - lo).norm(),
        };
        Ok((mesh.normalize_scale()?, ReflectivitySpecFrame(sim)))
    }

    /// The optimization problem on the configured input.
    pub fn problem(&self) -> Result<Problem, CliError> {
        let (mesh, frame) = self.load_mesh(None)?;
        self.problem_for(mesh, frame)
    }

    pub fn problem_for(&self, mesh: Mesh, frame: ReflectivitySpecFrame) -> Result<Problem, CliError> {
        Ok(Problem {
            mesh,
            brdf: self.brdf,
            lights: self.lights()?,
            emitter_radiance: self.light.emitter_radiance,
            spec: self.spec(frame.0),
            constraints: Vec::new(),
        })
    }
}

/// The frame a loaded mesh lives in, so targets can follow it.
#[derive(Debug, Clone, Copy)]
pub struct ReflectivitySpecFrame(Similarity);

fn absolute(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::path::absolute(&joined).unwrap_or(joined)
}
