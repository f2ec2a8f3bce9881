pub mod denoise;
pub mod energy;
pub mod error;
pub mod geom;
pub mod grad;
pub mod linalg;
pub mod optimize;
pub mod remesh;
pub mod rng;
pub mod session;
pub mod shapes;
pub mod stylize;
pub mod trace;

pub use error::{Error, Result};
pub use geom::{Mesh, Point, Vector};
pub use trace::{DirectionalBand, LightSet, PhongParams, PhongScene};
