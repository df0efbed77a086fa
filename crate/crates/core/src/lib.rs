//! Numerical toolkit for the heteroclinic connections of the thin-film
//! accumulation equation `(H''' + ξ² + a) H³ = 1`.

pub mod bounce;
pub mod error;
pub mod integrate;
pub mod limit_analysis;
mod linalg;
pub mod oscillation;
pub mod polyfamily;
mod quad;
pub mod shooting;
pub mod systems;
pub mod transforms;

pub use error::{Error, Result};
pub use integrate::{IntegratorConfig, Trajectory};
pub use systems::{LimitState, VectorField};
pub use transforms::{BounceState, CompactState, ModelParams, PhysState};
