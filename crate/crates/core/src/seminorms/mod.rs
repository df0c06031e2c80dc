//! Sampled seminorms over finite ball families.

pub mod bmo;
pub mod family;
pub mod muckenhoupt;
pub mod small;

pub use bmo::{bmo_matrix, bmo_scalar, shifted_log, BmoEstimate};
pub use family::{BallFamily, FamilySpec};
pub use muckenhoupt::{ball_power_means, muckenhoupt_ap, ApEstimate, BallAp};
pub use small::{
    calibrate, prop_small_check, prop_small_check_scalar, small_scalar_checks, BoundCheck, Calibrated, SmallReport,
    SmallScalarReport,
};
