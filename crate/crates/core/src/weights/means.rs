//! Logarithmic means `⟨ω⟩^log_B = exp(⨍_B log ω)` and `⟨M⟩^log_B = exp(⨍_B log M)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ball::Ball;
use crate::error::Result;
use crate::weights::field::{MatrixField, ScalarField, ScalarWeightField, WeightField};
use crate::weights::quadrature::{Quadrature, QuadratureSpec};
use crate::weights::spd::{spd_exp, SpdMatrix};

pub fn sample_scalar(f: &ScalarField, q: &Quadrature) -> Result<Vec<f64>> {
    q.points().map(|x| f.eval(x)).collect()
}

pub fn sample_matrix(f: &MatrixField, q: &Quadrature) -> Result<Vec<DMatrix<f64>>> {
    q.points().map(|x| f.eval(x)).collect()
}

/// Weighted mean of matrices over the rule, normalized by its coverage.
pub fn matrix_mean(values: &[DMatrix<f64>], q: &Quadrature) -> DMatrix<f64> {
    let n = values.first().map_or(0, |m| m.nrows());
    let mut acc = DMatrix::zeros(n, n);
    for (m, w) in values.iter().zip(q.weights()) {
        acc += m * *w;
    }
    acc / q.coverage()
}

pub fn log_mean_scalar(w: &ScalarWeightField, ball: &Ball, spec: &QuadratureSpec) -> Result<f64> {
    let q = spec.rule(ball, None, w.singular_points())?;
    log_mean_scalar_on(w, &q)
}

/// [`log_mean_scalar`] on a prebuilt rule.
pub fn log_mean_scalar_on(w: &ScalarWeightField, q: &Quadrature) -> Result<f64> {
    let logs = sample_scalar(&w.log_field(), q)?;
    Ok(q.mean(&logs).exp())
}

pub fn log_mean_matrix(m: &WeightField, ball: &Ball, spec: &QuadratureSpec) -> Result<SpdMatrix> {
    let q = spec.rule(ball, None, m.singular_points())?;
    log_mean_matrix_on(m, &q)
}

pub fn log_mean_matrix_on(m: &WeightField, q: &Quadrature) -> Result<SpdMatrix> {
    let logs = sample_matrix(&m.log_field(), q)?;
    spd_exp(&matrix_mean(&logs, q))
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub holds: bool,
    /// `λ_min(M_B) - ω_B/Λ`.
    pub lower_margin: f64,
    /// `ω_B - λ_max(M_B)`.
    pub upper_margin: f64,
    pub omega_b: f64,
    pub lambda: f64,
}

/// Checks `Λ⁻¹ ω_B I ≤ M_B ≤ ω_B I` with `ω = |M|`, both log means taken
/// on the same nodes. Margins within `1e-12·ω_B` of zero count as holding.
pub fn sandwich_check(m: &WeightField, ball: &Ball, spec: &QuadratureSpec, lambda: f64) -> Result<SandwichReport> {
    let q = spec.rule(ball, None, m.singular_points())?;
    let omega_b = log_mean_scalar_on(&m.scalar(), &q)?;
    let mb = log_mean_matrix_on(m, &q)?;
    let e = mb.eigen();
    let lower_margin = e.min() - omega_b / lambda;
    let upper_margin = omega_b - e.max();
    let slack = -1e-12 * omega_b;
    Ok(SandwichReport {
        holds: lower_margin >= slack && upper_margin >= slack,
        lower_margin,
        upper_margin,
        omega_b,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::registry::rank_one_radial;
    use nalgebra::dmatrix;

    fn unit_disk() -> Ball {
        Ball::centered(2, 1.0).unwrap()
    }

    #[test]
    fn constant_scalar_weight() {
        let w = ScalarWeightField::constant(2, 3.5).unwrap();
        let m = log_mean_scalar(&w, &unit_disk(), &QuadratureSpec::default()).unwrap();
        assert!((m - 3.5).abs() < 1e-14, "{m}");
    }

    #[test]
    fn power_weight_matches_closed_form() {
        // ⨍_{B_r} log|x| = log r - 1/n
        let w = ScalarWeightField::power(2, 0.3);
        let m = log_mean_scalar(&w, &unit_disk(), &QuadratureSpec::default()).unwrap();
        assert!((m - (-0.15f64).exp()).abs() < 1e-9, "{m}");
        let b = Ball::centered(2, 0.4).unwrap();
        let m = log_mean_scalar(&w, &b, &QuadratureSpec::default()).unwrap();
        assert!((m - 0.4f64.powf(0.3) * (-0.15f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn scalar_inversion_duality() {
        let w = ScalarWeightField::power(2, 0.7);
        let b = Ball::new(vec![0.1, -0.05], 0.3).unwrap();
        let spec = QuadratureSpec::default();
        let a = log_mean_scalar(&w.inverse(), &b, &spec).unwrap();
        let c = log_mean_scalar(&w, &b, &spec).unwrap();
        assert!((a * c - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_matrix_weight() {
        let c = SpdMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let w = WeightField::constant(c.clone(), "c");
        let m = log_mean_matrix(&w, &unit_disk(), &QuadratureSpec::default()).unwrap();
        assert!((m.as_matrix() - c.as_matrix()).abs().max() < 1e-13);
    }

    #[test]
    fn rank_one_mean_is_rotation_averaged() {
        let w = rank_one_radial(2, 0.5);
        let m = log_mean_matrix(&w, &unit_disk(), &QuadratureSpec::default()).unwrap();
        let e = m.eigen();
        assert!(e.max() / e.min() < 2.0 - 1e-6);
        // log M = log θ (I - x̂⊗x̂) averages to ½ log θ I
        assert!((e.min() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((e.max() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn matrix_inversion_duality() {
        let w = rank_one_radial(2, 0.6);
        let b = Ball::new(vec![0.2, 0.1], 0.25).unwrap();
        let spec = QuadratureSpec::default();
        let a = log_mean_matrix(&w.inverse(), &b, &spec).unwrap();
        let c = log_mean_matrix(&w, &b, &spec).unwrap().inverse();
        assert!((a.as_matrix() - c.as_matrix()).abs().max() < 1e-10);
    }

    #[test]
    fn sandwich_for_identity() {
        let w = WeightField::constant(SpdMatrix::identity(2), "I");
        let r = sandwich_check(&w, &unit_disk(), &QuadratureSpec::default(), 2.0).unwrap();
        assert!(r.holds);
        assert!((r.lower_margin - 0.5).abs() < 1e-14);
        assert!(r.upper_margin.abs() < 1e-14);
    }
}
