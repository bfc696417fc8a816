//! Finite element building blocks.

pub mod element;
pub mod mesh;
pub mod periodic;
pub mod sparse;

pub use element::{element_stiffness, Matrix8, Vector8};
pub use mesh::{assemble, assemble_matrices, solve_mesh, QuadMesh};
pub use periodic::{periodic_reduce, PeriodicMap};
pub use sparse::{solve_dirichlet, Cholesky, CsrMatrix};
