//! Grids of gradient-estimate ratios and their bounded/diverging split.
//!
//! Level `k` of a sweep meshes the unit disk with rings down to
//! `inner_radius · 10^{-decades·k}`. The outer rings are shared by all
//! levels, so any growth of a ratio comes from resolving the singularity.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::fem::problem::{Dirichlet, WeakProblem};
use crate::fem::solver::{solve, SolverConfig};
use crate::harness::cz::{cz_ratio, CzShape};
use crate::meyers::{MeyersExample, Variant};
use crate::seminorms::bmo::bmo_matrix;
use crate::seminorms::family::BallFamily;
use crate::weights::field::ScalarField;
use crate::weights::quadrature::QuadratureSpec;

/// Where the discrete `u` comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Nodal interpolant of the exact solution.
    #[default]
    Interpolant,
    /// Discrete solution with the exact boundary values.
    Solve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub experiment_id: String,
    pub variant: Variant,
    pub n: usize,
    pub eps: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: f64,
    pub levels: usize,
    pub sectors: usize,
    pub grading: f64,
    pub inner_radius: f64,
    /// Decades of extra depth per level.
    pub decades: f64,
    /// Centers and radii of the balls `B₀`.
    pub balls: Vec<([f64; 2], f64)>,
    pub shape: CzShape,
    pub source: Source,
    /// Per-level growth at or above which a cell is diverging.
    pub threshold: f64,
    /// Relative half-width of the band around the critical `ρ`.
    pub dead_zone: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            experiment_id: "cz-sweep".into(),
            variant: Variant::Plain,
            n: 2,
            eps: vec![0.25, 0.5],
            rho: vec![2.0, 3.0, 3.6, 4.4, 5.0, 6.0, 7.2, 8.8, 10.0, 12.0],
            p: 2.0,
            levels: 4,
            sectors: 16,
            grading: 0.7,
            inner_radius: 1e-4,
            decades: 16.0,
            balls: vec![([0.0, 0.0], 0.25)],
            shape: CzShape::Nonlinear,
            source: Source::Interpolant,
            threshold: 1.5,
            dead_zone: 0.1,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n != 2 {
            return Err(Error::invalid("sweeps run on planar meshes; n must be 2"));
        }
        if self.eps.is_empty() || self.rho.is_empty() || self.balls.is_empty() {
            return Err(Error::invalid("sweep needs eps, rho and ball lists"));
        }
        if self.levels < 3 {
            return Err(Error::invalid(format!("classification needs at least 3 levels, got {}", self.levels)));
        }
        if !(self.threshold > 1.0) || !(self.dead_zone >= 0.0) || !(self.decades > 0.0) {
            return Err(Error::invalid("threshold must exceed 1, dead zone and decades must be positive"));
        }
        let deepest = self.inner_radius * 10f64.powf(-self.decades * (self.levels - 1) as f64);
        if !(deepest > 1e-250) {
            return Err(Error::invalid(format!("deepest ring radius {deepest:e} underflows")));
        }
        for &r in &self.rho {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::invalid(format!("rho must lie in [1, inf), got {r}")));
            }
        }
        for &e in &self.eps {
            MeyersExample::new(self.variant, self.n, e)?;
        }
        for (c, r) in &self.balls {
            Ball::new(c.to_vec(), *r)?;
        }
        Ok(())
    }

    pub fn mesh(&self, level: usize) -> Result<Mesh> {
        let inner = self.inner_radius * 10f64.powf(-self.decades * level as f64);
        let mut m = Mesh::graded_disk(self.sectors, self.grading, inner)?;
        m.refinement_level = level;
        Ok(m)
    }

    /// `ρ` at which the weighted gradient stops being integrable.
    pub fn critical_rho(&self, eps: f64) -> Result<f64> {
        let ex = MeyersExample::new(self.variant, self.n, eps)?;
        Ok(self.n as f64 / (ex.gradient_exponent() + ex.weight_exponent()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Bounded,
    Diverging,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub rho: f64,
    pub ball_id: usize,
    pub ball: Ball,
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub bmo_log_m: f64,
    pub lambda: f64,
    pub classification: Classification,
    pub near_critical: bool,
}

impl SweepRow {
    /// `bounded`, `diverging` or `failed`, prefixed `near-critical:` in the dead zone.
    pub fn label(&self) -> String {
        let base = match self.classification {
            Classification::Bounded => "bounded",
            Classification::Diverging => "diverging",
            Classification::Failed => "failed",
        };
        if self.near_critical {
            format!("near-critical:{base}")
        } else {
            base.to_string()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Boundary {
    pub eps: f64,
    pub ball_id: usize,
    pub critical_rho: f64,
    pub largest_bounded: Option<f64>,
    pub smallest_diverging: Option<f64>,
    /// Midpoint of the two, when both exist.
    pub detected: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepFailure {
    pub eps: f64,
    pub rho: f64,
    pub ball_id: usize,
    pub level: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub boundaries: Vec<Boundary>,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn classification(&self, eps: f64, rho: f64, ball_id: usize) -> Option<Classification> {
        self.rows
            .iter()
            .find(|r| r.eps == eps && r.rho == rho && r.ball_id == ball_id)
            .map(|r| r.classification)
    }
}

/// Per-level growth `(r_last/r_first)^{1/(L-1)}`.
pub fn growth_factor(ratios: &[f64]) -> f64 {
    let (first, last) = (ratios[0], ratios[ratios.len() - 1]);
    if !last.is_finite() {
        return f64::INFINITY;
    }
    (last / first).powf(1.0 / (ratios.len() - 1) as f64)
}

fn discrete_u(spec: &SweepSpec, ex: &MeyersExample, mesh: Arc<Mesh>, solver: &SolverConfig) -> Result<DiscreteField> {
    let exact = |x: &[f64]| match ex.u(x) {
        Err(Error::SingularPoint { .. }) => Ok(0.0),
        other => other,
    };
    match spec.source {
        Source::Interpolant => DiscreteField::interpolate(mesh, exact),
        Source::Solve => {
            let e = ex.clone();
            let bc = ScalarField::new(2, "u", move |x: &[f64]| e.u(x));
            let prob = WeakProblem::new(ex.weight_field(), spec.p)?.with_dirichlet(Dirichlet::Function(bc));
            Ok(solve(&prob, mesh, solver)?.0)
        }
    }
}

/// Runs `cz_ratio` over the whole grid. Failing cells are recorded and skipped.
pub fn sweep(spec: &SweepSpec, quad: &QuadratureSpec, solver: &SolverConfig) -> Result<SweepReport> {
    spec.validate()?;
    let meshes = (0..spec.levels)
        .map(|l| spec.mesh(l).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let balls: Vec<Ball> = spec
        .balls
        .iter()
        .map(|(c, r)| Ball::new(c.to_vec(), *r))
        .collect::<Result<_>>()?;

    // one task per (eps, level): the discrete u and every (rho, ball) ratio on it
    let tasks: Vec<(usize, usize)> = (0..spec.eps.len())
        .flat_map(|e| (0..spec.levels).map(move |l| (e, l)))
        .collect();
    type Cell = (usize, usize, usize, usize, std::result::Result<(f64, f64, Option<f64>), String>);
    let results: Vec<Vec<Cell>> = tasks
        .par_iter()
        .map(|&(ei, level)| {
            let ex = match MeyersExample::new(spec.variant, spec.n, spec.eps[ei]) {
                Ok(ex) => ex,
                Err(e) => return vec![(ei, 0, 0, level, Err(e.to_string()))],
            };
            let setup = WeakProblem::new(ex.weight_field(), spec.p)
                .and_then(|prob| Ok((discrete_u(spec, &ex, meshes[level].clone(), solver)?, prob)));
            let mut out = Vec::new();
            for ri in 0..spec.rho.len() {
                for (bi, b) in balls.iter().enumerate() {
                    let cell = match &setup {
                        Err(e) => Err(e.to_string()),
                        Ok((u, prob)) => cz_ratio(u, prob, b, spec.rho[ri], spec.shape)
                            .map(|row| (row.lhs, row.rhs, row.ratio))
                            .map_err(|e| e.to_string()),
                    };
                    out.push((ei, ri, bi, level, cell));
                }
            }
            out
        })
        .collect();

    let diagnostics = spec
        .eps
        .iter()
        .flat_map(|&eps| balls.iter().map(move |b| (eps, b)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(eps, b)| {
            let ex = MeyersExample::new(spec.variant, spec.n, *eps)?;
            let (_, outer) = spec.shape.balls(b);
            let fam = BallFamily::dyadic_grid(outer, 3, 2.0)?;
            Ok((bmo_matrix(&ex.weight_field().log_field(), &fam, quad)?.value, ex.condition_bound()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let mut grouped: BTreeMap<(usize, usize, usize), Vec<(usize, std::result::Result<(f64, f64, Option<f64>), String>)>> =
        BTreeMap::new();
    for (ei, ri, bi, level, cell) in results.into_iter().flatten() {
        grouped.entry((ei, ri, bi)).or_default().push((level, cell));
    }

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((ei, ri, bi), mut cells) in grouped {
        cells.sort_by_key(|c| c.0);
        let (eps, rho) = (spec.eps[ei], spec.rho[ri]);
        let critical = spec.critical_rho(eps)?;
        let near_critical = (rho / critical - 1.0).abs() <= spec.dead_zone;
        let ratios: Option<Vec<f64>> = cells
            .iter()
            .map(|(_, c)| c.as_ref().ok().map(|(_, _, r)| r.unwrap_or(0.0)))
            .collect();
        let classification = match ratios {
            Some(r) if r[0] > 0.0 => {
                if growth_factor(&r) >= spec.threshold {
                    Classification::Diverging
                } else {
                    Classification::Bounded
                }
            }
            // all ratios 0/0 or 0: nothing grows
            Some(_) => Classification::Bounded,
            None => Classification::Failed,
        };
        let (bmo, lambda) = diagnostics[ei * balls.len() + bi];
        for (level, cell) in cells {
            let (lhs, rhs, ratio) = match cell {
                Ok(v) => v,
                Err(message) => {
                    warn!("sweep cell eps={eps} rho={rho} ball={bi} level={level} failed: {message}");
                    failures.push(SweepFailure {
                        eps,
                        rho,
                        ball_id: bi,
                        level,
                        message,
                    });
                    (f64::NAN, f64::NAN, None)
                }
            };
            rows.push(SweepRow {
                eps,
                rho,
                ball_id: bi,
                ball: balls[bi].clone(),
                level,
                lhs,
                rhs,
                ratio,
                bmo_log_m: bmo,
                lambda,
                classification,
                near_critical,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.eps
            .total_cmp(&b.eps)
            .then(a.rho.total_cmp(&b.rho))
            .then(a.ball_id.cmp(&b.ball_id))
            .then(a.level.cmp(&b.level))
    });

    let mut boundaries = Vec::new();
    for &eps in &spec.eps {
        for bi in 0..balls.len() {
            let mut cls: Vec<(f64, Classification)> = rows
                .iter()
                .filter(|r| r.eps == eps && r.ball_id == bi && r.level == 0)
                .map(|r| (r.rho, r.classification))
                .collect();
            cls.sort_by(|a, b| a.0.total_cmp(&b.0));
            let smallest_diverging = cls.iter().find(|c| c.1 == Classification::Diverging).map(|c| c.0);
            let largest_bounded = cls
                .iter()
                .filter(|c| c.1 == Classification::Bounded && smallest_diverging.is_none_or(|d| c.0 < d))
                .map(|c| c.0)
                .last();
            boundaries.push(Boundary {
                eps,
                ball_id: bi,
                critical_rho: spec.critical_rho(eps)?,
                largest_bounded,
                smallest_diverging,
                detected: largest_bounded.zip(smallest_diverging).map(|(a, b)| 0.5 * (a + b)),
            });
        }
    }
    Ok(SweepReport {
        rows,
        boundaries,
        failures,
    })
}
