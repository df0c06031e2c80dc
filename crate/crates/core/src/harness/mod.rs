//! Empirical checks of the inequalities on discrete solutions.

pub mod cz;
pub mod localized;
pub mod maximal;
pub mod sweep;

pub use cz::{caccioppoli_check, cz_ratio, poincare_check, CaccioppoliReport, CzRow, CzShape, PoincareReport};
pub use localized::{build_localized, comparison_check, ComparisonReport, LocalizedTriple};
pub use maximal::{fefferman_stein, maximal, sharp_maximal, zoom_balls, FeffermanSteinRow, Samples};
pub use sweep::{sweep, Classification, Source, SweepReport, SweepRow, SweepSpec};
