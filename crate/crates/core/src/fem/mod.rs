//! P1 finite elements for weighted p-Laplace problems on planar meshes.

pub mod field;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod solver;

pub use field::DiscreteField;
pub use mesh::{Geometry, Mesh, MeshSpec};
pub use norms::{weighted_h1_error, weighted_lp_norm};
pub use problem::{DataField, Dirichlet, WeakProblem};
pub use solver::{energy, solve, weak_residual, ConvergenceTrace, SolverConfig};
