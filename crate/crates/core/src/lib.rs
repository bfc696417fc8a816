//! Two-stage lattice structure optimization.

pub mod buckling;
pub mod cluster;
pub mod error;
pub mod fe;
pub mod fmo;
pub mod gcmma;
pub mod homogenize;
pub mod invhom;
pub mod kelvin;
pub mod lattice;
pub mod pipeline;
pub mod postprocess;
pub mod templates;

pub use error::{Error, Result};
pub use kelvin::{base_material, KelvinMatrix, StrainState, StressState};
