//! Pointwise SPD algebra, weight fields and logarithmic means.

pub mod field;
pub mod means;
pub mod quadrature;
pub mod registry;
pub mod spd;

pub use field::{Field, MatrixField, Provenance, ScalarField, ScalarWeightField, WeightField};
pub use means::{log_mean_matrix, log_mean_scalar, sandwich_check, SandwichReport};
pub use quadrature::{Quadrature, QuadratureSpec};
pub use registry::WeightSpec;
pub use spd::{condition_number, spd_exp, spd_log, SpdMatrix};
