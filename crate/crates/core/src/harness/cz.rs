//! Both sides of the gradient estimates, Caccioppoli and Poincaré ratios.

use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::fem::norms::{cell_lp_mean, eval_near};
use crate::fem::problem::WeakProblem;
use crate::nfunctions::conjugate_exponent;
use crate::seminorms::family::BallFamily;
use crate::seminorms::muckenhoupt::ball_power_means;
use crate::weights::field::ScalarWeightField;
use crate::weights::quadrature::QuadratureSpec;

/// Which pair of balls the estimate compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CzShape {
    /// `½B₀` against `4B₀`.
    #[default]
    Nonlinear,
    /// `B₀` against `2B₀`.
    Linear,
}

impl CzShape {
    pub fn balls(self, b0: &Ball) -> (Ball, Ball) {
        match self {
            CzShape::Nonlinear => (b0.dilate(0.5), b0.dilate(4.0)),
            CzShape::Linear => (b0.clone(), b0.dilate(2.0)),
        }
    }
}

/// `lhs/rhs`, `None` for `0/0`.
pub fn safe_ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs == 0.0 {
        None
    } else {
        Some(f64::INFINITY)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CzRow {
    pub ball: Ball,
    pub rho: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub level: usize,
    /// Sampled `bmo(log M)` near the ball, when computed.
    pub bmo_log_m: Option<f64>,
    pub lambda: Option<f64>,
    pub divergent: bool,
}

/// `ω = |M|` at every barycenter.
pub fn cell_omega(mesh: &Mesh, prob: &WeakProblem) -> Result<Vec<f64>> {
    if let Some(m) = &prob.frozen {
        return Ok(vec![m.spectral_norm(); mesh.cell_count()]);
    }
    (0..mesh.cell_count())
        .map(|c| Ok(eval_near(prob.weight.as_field(), mesh.barycenter(c), mesh.diameter(c))?.spectral_norm()))
        .collect()
}

/// `|G|` at every barycenter.
pub fn cell_data_norm(mesh: &Mesh, prob: &WeakProblem) -> Result<Vec<f64>> {
    (0..mesh.cell_count())
        .map(|c| {
            let g = prob.data.at(c, &mesh.barycenter(c))?;
            Ok(g[0].hypot(g[1]))
        })
        .collect()
}

fn require_fit(mesh: &Mesh, b: &Ball) -> Result<()> {
    if mesh.geometry.contains_ball(b) {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{b:?} leaves the mesh domain")))
    }
}

/// `(⨍_{inner}(|∇u|ω)^ρ)^{1/ρ}` against `⨍_{outer}|∇u|ω + (⨍_{outer}(|G|ω)^ρ)^{1/ρ}`.
pub fn cz_ratio(u: &DiscreteField, prob: &WeakProblem, b0: &Ball, rho: f64, shape: CzShape) -> Result<CzRow> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must lie in [1, inf), got {rho}")));
    }
    let mesh = u.mesh();
    let (inner, outer) = shape.balls(b0);
    require_fit(mesh, &outer)?;
    let omega = cell_omega(mesh, prob)?;
    let grad: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let g = u.gradient(c);
            g[0].hypot(g[1]) * omega[c]
        })
        .collect();
    let data: Vec<f64> = cell_data_norm(mesh, prob)?.iter().zip(&omega).map(|(g, w)| g * w).collect();
    let lhs = cell_lp_mean(mesh, &grad, rho, &inner)?;
    let rhs = cell_lp_mean(mesh, &grad, 1.0, &outer)? + cell_lp_mean(mesh, &data, rho, &outer)?;
    Ok(CzRow {
        ball: b0.clone(),
        rho,
        p: prob.p,
        lhs,
        rhs,
        ratio: safe_ratio(lhs, rhs),
        level: mesh.refinement_level,
        bmo_log_m: None,
        lambda: prob.weight.condition_bound(),
        divergent: !lhs.is_finite(),
    })
}

/// Area-weighted mean of `values` over cells with barycenter in `b`.
pub(crate) fn cell_mean_over(mesh: &Mesh, values: &[f64], b: &Ball) -> Result<f64> {
    let cells = mesh.cells_in(b);
    if cells.is_empty() {
        return Err(Error::Geometry(format!("no cell barycenter inside {b:?}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for c in cells {
        let a = mesh.area(c);
        num += values[c] * a;
        den += a;
    }
    Ok(num / den)
}

/// `⟨u⟩_B` from cell means.
pub fn field_mean(u: &DiscreteField, b: &Ball) -> Result<f64> {
    let means: Vec<f64> = (0..u.mesh().cell_count()).map(|c| u.cell_mean(c)).collect();
    cell_mean_over(u.mesh(), &means, b)
}

#[derive(Clone, Debug, Serialize)]
pub struct CaccioppoliReport {
    /// `⨍_B |∇u|ᵖ ωᵖ`
    pub lhs: f64,
    /// `⨍_{2B} |u - ⟨u⟩_{2B}|ᵖ/rᵖ ωᵖ`
    pub oscillation: f64,
    /// `⨍_{2B} |G|ᵖ ωᵖ`
    pub data: f64,
    pub ratio: Option<f64>,
}

pub fn caccioppoli_check(u: &DiscreteField, prob: &WeakProblem, b: &Ball) -> Result<CaccioppoliReport> {
    let mesh = u.mesh();
    let outer = b.dilate(2.0);
    require_fit(mesh, &outer)?;
    let p = prob.p;
    let omega = cell_omega(mesh, prob)?;
    let mean = field_mean(u, &outer)?;
    let r = b.radius;
    let grad: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let g = u.gradient(c);
            (g[0].hypot(g[1]) * omega[c]).powf(p)
        })
        .collect();
    // |u - mean|^p averaged over the three interior points of each cell
    let osc: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let s: f64 = crate::fem::norms::CELL_RULE
                .iter()
                .map(|l| ((u.value_in(c, *l) - mean) / r).abs().powf(p))
                .sum();
            s / 3.0 * omega[c].powf(p)
        })
        .collect();
    let data: Vec<f64> = cell_data_norm(mesh, prob)?
        .iter()
        .zip(&omega)
        .map(|(g, w)| (g * w).powf(p))
        .collect();
    let lhs = cell_mean_over(mesh, &grad, b)?;
    let oscillation = cell_mean_over(mesh, &osc, &outer)?;
    let data = cell_mean_over(mesh, &data, &outer)?;
    Ok(CaccioppoliReport {
        lhs,
        oscillation,
        data,
        ratio: safe_ratio(lhs, oscillation + data),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareReport {
    /// `(⨍_B |(u - ⟨u⟩_B)/r|ᵖ ωᵖ)^{1/p}`
    pub lhs: f64,
    /// `(⨍_B (|∇u| ω)^{θp})^{1/(θp)}`
    pub rhs: f64,
    pub ratio: Option<f64>,
    /// Sampled `sup_{B' ⊂ 2B} (⨍ωᵖ)^{1/p} (⨍ω^{-(θp)'})^{1/(θp)'}`.
    pub weight_constant: f64,
    /// Set when the weight condition fails on a sampled sub-ball.
    pub condition_flagged: bool,
}

/// Ratio of the scaled Poincaré inequality on `b`, with the weight
/// condition sampled over sub-balls of `2B` from `sub_levels` dyadic levels.
pub fn poincare_check(
    u: &DiscreteField,
    w: &ScalarWeightField,
    b: &Ball,
    p: f64,
    theta: f64,
    sub_levels: usize,
    quad: &QuadratureSpec,
) -> Result<PoincareReport> {
    let n = 2.0;
    let tp = theta * p;
    if !(p > 1.0 && theta > 0.0 && theta <= 1.0) {
        return Err(Error::invalid(format!("need p > 1 and theta in (0, 1], got p={p}, theta={theta}")));
    }
    if tp < 1.0f64.max(n * p / (n + p)) - 1e-12 {
        return Err(Error::invalid(format!(
            "theta p = {tp} is below max(1, np/(n+p)) = {}",
            1.0f64.max(n * p / (n + p))
        )));
    }
    let mesh = u.mesh();
    let cells = mesh.cells_in(b);
    if cells.is_empty() {
        return Err(Error::Geometry(format!("no cell barycenter inside {b:?}")));
    }
    let omega: Vec<f64> = (0..mesh.cell_count())
        .map(|c| eval_near(w.as_field(), mesh.barycenter(c), mesh.diameter(c)))
        .collect::<Result<_>>()?;
    let mean = field_mean(u, b)?;
    let osc: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let s: f64 = crate::fem::norms::CELL_RULE
                .iter()
                .map(|l| ((u.value_in(c, *l) - mean) / b.radius).abs().powf(p))
                .sum();
            s / 3.0 * omega[c].powf(p)
        })
        .collect();
    let grad: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let g = u.gradient(c);
            g[0].hypot(g[1]) * omega[c]
        })
        .collect();
    let lhs = cell_mean_over(mesh, &osc, b)?.powf(1.0 / p);
    let rhs = cell_lp_mean(mesh, &grad, tp, b)?;

    let outer = b.dilate(2.0);
    let fam = BallFamily::dyadic_grid(outer.clone(), sub_levels.max(1), 2.0)?;
    let subs: Vec<Ball> = fam.balls().iter().filter(|s| s.inside(&outer)).cloned().collect();
    let mut weight_constant: f64 = 0.0;
    let mut flagged = false;
    for s in subs.iter().chain(std::iter::once(&outer)) {
        let (value, divergent) = if tp == 1.0 {
            // (θp)' = ∞: the second factor is the supremum of 1/ω
            let rule = quad.rule(s, None, w.singular_points())?;
            let v = crate::weights::means::sample_scalar(w.as_field(), &rule)?;
            let pos: Vec<f64> = v.iter().map(|x| x.powf(p)).collect();
            let inv = v.iter().map(|x| 1.0 / x).fold(0.0, f64::max);
            (rule.mean(&pos).powf(1.0 / p) * inv, rule.diverges(&pos))
        } else {
            let ap = ball_power_means(w, s, None, p, conjugate_exponent(tp), quad)?;
            (ap.product(), ap.divergent)
        };
        flagged |= divergent || !value.is_finite();
        weight_constant = weight_constant.max(value);
    }
    Ok(PoincareReport {
        lhs,
        rhs,
        ratio: safe_ratio(lhs, rhs),
        weight_constant,
        condition_flagged: flagged,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::mesh::MeshSpec;
    use crate::weights::field::WeightField;
    use crate::weights::spd::SpdMatrix;

    fn identity_problem(p: f64) -> WeakProblem {
        WeakProblem::new(WeightField::constant(SpdMatrix::identity(2), "I"), p).unwrap()
    }

    #[test]
    fn constant_gradient_ratio_is_one() {
        let m = Arc::new(MeshSpec::default().build(1).unwrap());
        let u = DiscreteField::interpolate(m, |x| Ok(x[0])).unwrap();
        let b0 = Ball::new(vec![0.1, 0.0], 0.2).unwrap();
        let row = cz_ratio(&u, &identity_problem(2.0), &b0, 4.0, CzShape::Nonlinear).unwrap();
        assert!((row.lhs - 1.0).abs() < 1e-9 && (row.rhs - 1.0).abs() < 1e-9);
        assert!((row.ratio.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_over_zero_is_a_sentinel() {
        let m = Arc::new(MeshSpec::default().build(0).unwrap());
        let u = DiscreteField::interpolate(m, |_| Ok(3.0)).unwrap();
        let b0 = Ball::new(vec![0.0, 0.0], 0.25).unwrap();
        let row = cz_ratio(&u, &identity_problem(2.0), &b0, 2.0, CzShape::Nonlinear).unwrap();
        assert_eq!((row.lhs, row.rhs, row.ratio), (0.0, 0.0, None));
        let c = caccioppoli_check(&u, &identity_problem(2.0), &b0).unwrap();
        assert_eq!(c.lhs, 0.0);
    }

    #[test]
    fn outer_ball_must_fit() {
        let m = Arc::new(MeshSpec::default().build(0).unwrap());
        let u = DiscreteField::zeros(m);
        let b0 = Ball::new(vec![0.0, 0.0], 0.3).unwrap();
        assert!(matches!(
            cz_ratio(&u, &identity_problem(2.0), &b0, 2.0, CzShape::Nonlinear),
            Err(Error::Geometry(_))
        ));
        assert!(cz_ratio(&u, &identity_problem(2.0), &b0, 2.0, CzShape::Linear).is_ok());
    }

    #[test]
    fn scaling_invariance() {
        let ex = crate::meyers::MeyersExample::plain(2, 0.25).unwrap();
        let m = Arc::new(MeshSpec::default().build(1).unwrap());
        let u = DiscreteField::interpolate(m.clone(), |x| ex.u(x).or(Ok(0.0))).unwrap();
        let prob = WeakProblem::new(ex.weight_field(), 2.0).unwrap();
        let b0 = Ball::new(vec![0.0, 0.0], 0.25).unwrap();
        let a = cz_ratio(&u, &prob, &b0, 3.0, CzShape::Nonlinear).unwrap();
        let t = 7.5;
        let scaled = WeakProblem::new(ex.weight_field().scaled(t).unwrap(), 2.0).unwrap();
        let v = DiscreteField::new(m, u.values.iter().map(|x| x / t).collect()).unwrap();
        let b = cz_ratio(&v, &scaled, &b0, 3.0, CzShape::Nonlinear).unwrap();
        let (ra, rb) = (a.ratio.unwrap(), b.ratio.unwrap());
        assert!((ra - rb).abs() <= 1e-10 * ra, "{ra} vs {rb}");
    }

    #[test]
    fn caccioppoli_linear_on_square() {
        let m = Arc::new(crate::fem::mesh::Mesh::unit_square(32).unwrap());
        let u = DiscreteField::interpolate(m, |x| Ok(x[0])).unwrap();
        let b = Ball::new(vec![0.5, 0.5], 0.25).unwrap();
        let c = caccioppoli_check(&u, &identity_problem(2.0), &b).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12);
        // ⨍_{B_{1/2}} (x₁-½)² / (1/4)² = (1/16)/(1/16) = 1 up to the cell selection
        assert!((c.oscillation - 1.0).abs() < 0.1, "{}", c.oscillation);
        assert!(c.ratio.unwrap().is_finite());
    }

    #[test]
    fn poincare_disk_moment() {
        let m = Arc::new(MeshSpec::default().build(3).unwrap());
        let u = DiscreteField::interpolate(m, |x| Ok(x[0])).unwrap();
        let one = ScalarWeightField::constant(2, 1.0).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let r = poincare_check(&u, &one, &b, 2.0, 1.0, 2, &QuadratureSpec::default()).unwrap();
        assert!((r.lhs - 0.5).abs() < 2e-3, "{}", r.lhs);
        assert!((r.rhs - 1.0).abs() < 1e-9);
        assert!((r.weight_constant - 1.0).abs() < 1e-9 && !r.condition_flagged);
    }

    #[test]
    fn poincare_rejects_small_theta() {
        let m = Arc::new(MeshSpec::default().build(0).unwrap());
        let u = DiscreteField::zeros(m);
        let one = ScalarWeightField::constant(2, 1.0).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 0.5).unwrap();
        assert!(poincare_check(&u, &one, &b, 2.0, 0.4, 1, &QuadratureSpec::default()).is_err());
    }
}
