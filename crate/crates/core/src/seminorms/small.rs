//! Consequences of small `|log M|_BMO` on a ball: relative oscillation of
//! `M` around its log mean, and reverse-Jensen bounds for scalar weights.

use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::seminorms::bmo::{bmo_matrix, bmo_scalar};
use crate::seminorms::family::BallFamily;
use crate::seminorms::muckenhoupt::ball_power_means;
use crate::weights::field::{ScalarWeightField, WeightField};
use crate::weights::means::{log_mean_matrix_on, log_mean_scalar_on, sample_scalar};
use crate::weights::quadrature::QuadratureSpec;
use crate::weights::spd::sym_norm;

/// Constants the theory leaves unquantified, fitted on `|x|^ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    /// Largest `γ` for which the scalar checks pass on the test family.
    pub gamma: f64,
    /// Largest `lhs / (q·bmo)` observed on the test family.
    pub c3: f64,
}

impl Default for Calibrated {
    fn default() -> Self {
        Calibrated { gamma: 0.7, c3: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallReport {
    /// `(⨍_B (|M - M_B| / |M_B|)^q)^{1/q}`
    pub lhs: f64,
    /// `|log M|_BMO(B)` on the sub-family.
    pub bmo: f64,
    pub q: f64,
    /// `lhs / (q·bmo)`, `0` when both vanish.
    pub ratio: f64,
    /// `c₃·q·bmo` for the supplied `c₃`.
    pub rhs_bound: f64,
    pub holds: bool,
}

const NEGLIGIBLE: f64 = 1e-12;

fn sub_family(ball: &Ball) -> Result<BallFamily> {
    BallFamily::dyadic_grid(ball.clone(), 3, 2.0)
}

/// Relative oscillation of a matrix weight around its log mean.
pub fn prop_small_check(m: &WeightField, ball: &Ball, q: f64, c3: f64, quad: &QuadratureSpec) -> Result<SmallReport> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q must be at least 1, got {q}")));
    }
    let bmo = bmo_matrix(&m.log_field(), &sub_family(ball)?, quad)?.value;
    let rule = quad.rule(ball, None, m.singular_points())?;
    let mb = log_mean_matrix_on(m, &rule)?;
    let norm_mb = mb.spectral_norm();
    let mut dev = Vec::with_capacity(rule.len());
    for x in rule.points() {
        let d = sym_norm(&(m.eval(x)?.as_matrix() - mb.as_matrix())) / norm_mb;
        dev.push(d.powf(q));
    }
    let lhs = rule.mean(&dev).powf(1.0 / q);
    Ok(report(lhs, bmo, q, c3))
}

/// [`prop_small_check`] for a scalar weight.
pub fn prop_small_check_scalar(
    w: &ScalarWeightField,
    ball: &Ball,
    q: f64,
    c3: f64,
    quad: &QuadratureSpec,
) -> Result<SmallReport> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q must be at least 1, got {q}")));
    }
    let bmo = bmo_scalar(&w.log_field(), &sub_family(ball)?, quad)?.value;
    let rule = quad.rule(ball, None, w.singular_points())?;
    let lm = log_mean_scalar_on(w, &rule)?;
    let v = sample_scalar(w.as_field(), &rule)?;
    let dev: Vec<f64> = v.iter().map(|x| ((x - lm).abs() / lm).powf(q)).collect();
    let lhs = rule.mean(&dev).powf(1.0 / q);
    Ok(report(lhs, bmo, q, c3))
}

fn report(lhs: f64, bmo: f64, q: f64, c3: f64) -> SmallReport {
    // both sides at roundoff level count as zero
    let ratio = if lhs <= NEGLIGIBLE && bmo <= NEGLIGIBLE {
        0.0
    } else if bmo > 0.0 {
        lhs / (q * bmo)
    } else {
        f64::INFINITY
    };
    let rhs_bound = c3 * q * bmo;
    SmallReport {
        lhs,
        bmo,
        q,
        ratio,
        rhs_bound,
        holds: lhs <= rhs_bound * (1.0 + 1e-12) + NEGLIGIBLE,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub bound: f64,
    pub divergent: bool,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, bound: f64, divergent: bool) -> Self {
        BoundCheck {
            lhs,
            bound,
            divergent,
            holds: !divergent && lhs <= bound * (1.0 + 1e-12),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallScalarReport {
    pub bmo: f64,
    pub s: f64,
    pub gamma: f64,
    /// `bmo ≤ γ/s`: the hypothesis of the first two bounds.
    pub applicable: bool,
    /// `bmo ≤ γ min(1/s, 1/s')`: the hypothesis of the `A_s` bound.
    pub ap_applicable: bool,
    pub log_mean: f64,
    /// `(⨍ω^s)^{1/s} ≤ 2⟨ω⟩^log`
    pub positive: BoundCheck,
    /// `(⨍ω^{-s})^{1/s} ≤ 2/⟨ω⟩^log`
    pub negative: BoundCheck,
    /// `(⨍ω^s)^{1/s}(⨍ω^{-s'})^{1/s'} ≤ 4`, with `s > 1`
    pub ap: Option<BoundCheck>,
}

impl SmallScalarReport {
    /// All bounds whose hypothesis is met hold.
    pub fn consistent(&self) -> bool {
        let first = !self.applicable || (self.positive.holds && self.negative.holds);
        let third = !self.ap_applicable || self.ap.as_ref().is_none_or(|a| a.holds);
        first && third
    }

    /// Every bound holds, regardless of hypotheses.
    pub fn all_hold(&self) -> bool {
        self.positive.holds && self.negative.holds && self.ap.as_ref().is_none_or(|a| a.holds)
    }
}

pub fn small_scalar_checks(
    w: &ScalarWeightField,
    ball: &Ball,
    s: f64,
    gamma: f64,
    quad: &QuadratureSpec,
) -> Result<SmallScalarReport> {
    if !(s >= 1.0) {
        return Err(Error::invalid(format!("s must be at least 1, got {s}")));
    }
    let bmo = bmo_scalar(&w.log_field(), &sub_family(ball)?, quad)?.value;
    let both = ball_power_means(w, ball, None, s, s, quad)?;
    let lm = both.log_mean;
    let positive = BoundCheck::new(both.positive, 2.0 * lm, positive_diverges(w, ball, s, quad)?);
    let negative = BoundCheck::new(both.negative, 2.0 / lm, negative_diverges(w, ball, s, quad)?);
    let (ap, ap_applicable) = if s > 1.0 {
        let sc = crate::nfunctions::conjugate_exponent(s);
        let m = ball_power_means(w, ball, None, s, sc, quad)?;
        (
            Some(BoundCheck::new(m.product(), 4.0, m.divergent)),
            bmo <= gamma * (1.0 / s).min(1.0 / sc),
        )
    } else {
        (None, false)
    };
    Ok(SmallScalarReport {
        bmo,
        s,
        gamma,
        applicable: bmo <= gamma / s,
        ap_applicable,
        log_mean: lm,
        positive,
        negative,
        ap,
    })
}

fn positive_diverges(w: &ScalarWeightField, ball: &Ball, s: f64, quad: &QuadratureSpec) -> Result<bool> {
    let rule = quad.rule(ball, None, w.singular_points())?;
    let v: Vec<f64> = sample_scalar(w.as_field(), &rule)?.iter().map(|x| x.powf(s)).collect();
    Ok(rule.diverges(&v))
}

fn negative_diverges(w: &ScalarWeightField, ball: &Ball, s: f64, quad: &QuadratureSpec) -> Result<bool> {
    let rule = quad.rule(ball, None, w.singular_points())?;
    let v: Vec<f64> = sample_scalar(w.as_field(), &rule)?.iter().map(|x| x.powf(-s)).collect();
    Ok(rule.diverges(&v))
}

/// Calibrates `γ` and `c₃` on `ω = |x|^ε` over `B_1(0)` in the plane.
///
/// `γ` is `s·bmo(log ω)` at the largest `ε` of the grid below which every
/// scalar bound holds; `c₃` is the largest `lhs/(q·bmo)` over the grid.
pub fn calibrate(eps_grid: &[f64], s: f64, q: f64, quad: &QuadratureSpec) -> Result<Calibrated> {
    let ball = Ball::centered(2, 1.0)?;
    let mut gamma = 0.0_f64;
    let mut c3 = 0.0_f64;
    let mut grid = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut passing = true;
    for eps in grid {
        let w = ScalarWeightField::power(2, eps);
        if passing {
            let r = small_scalar_checks(&w, &ball, s, f64::INFINITY, quad)?;
            if r.all_hold() {
                gamma = gamma.max(s * r.bmo);
            } else {
                passing = false;
            }
        }
        let m = prop_small_check_scalar(&w, &ball, q, 0.0, quad)?;
        if m.ratio.is_finite() {
            c3 = c3.max(m.ratio);
        }
    }
    Ok(Calibrated { gamma, c3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meyers::MeyersExample;
    use crate::weights::spd::SpdMatrix;

    fn unit() -> Ball {
        Ball::centered(2, 1.0).unwrap()
    }

    fn quad() -> QuadratureSpec {
        QuadratureSpec::Polar { radial: 24, angular: 32 }
    }

    #[test]
    fn constant_field_has_zero_lhs() {
        let w = WeightField::constant(SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap(), "c");
        let r = prop_small_check(&w, &unit(), 2.0, 1.0, &quad()).unwrap();
        assert!(r.lhs < 1e-14);
        assert_eq!(r.ratio, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn constant_scalar_bounds() {
        let w = ScalarWeightField::constant(2, 3.0).unwrap();
        let r = small_scalar_checks(&w, &unit(), 4.0, 0.7, &quad()).unwrap();
        assert!(r.applicable && r.all_hold());
        assert!((r.positive.lhs - 3.0).abs() < 1e-13);
        assert!((r.log_mean - 3.0).abs() < 1e-13);
    }

    #[test]
    fn mild_power_weight_passes() {
        let w = ScalarWeightField::power(2, 0.02);
        let r = small_scalar_checks(&w, &unit(), 4.0, 0.7, &QuadratureSpec::default()).unwrap();
        assert!(r.applicable && r.all_hold() && r.consistent());
        // closed forms ⨍|x|^{±εs} = n/(n ± εs)
        let expect = (2.0f64 / 2.08).powf(0.25);
        assert!((r.positive.lhs - expect).abs() < 1e-8);
    }

    #[test]
    fn strong_power_weight_diverges() {
        let w = ScalarWeightField::power(2, 0.6);
        let r = small_scalar_checks(&w, &unit(), 4.0, 0.7, &QuadratureSpec::default()).unwrap();
        assert!(r.negative.divergent);
        assert!(!r.negative.holds);
        assert!(!r.applicable);
        assert!(r.consistent());
    }

    #[test]
    fn relative_oscillation_for_example_weight() {
        let ex = MeyersExample::plain(2, 0.1).unwrap();
        let r = prop_small_check(&ex.weight_field(), &unit(), 4.0, 1.0, &quad()).unwrap();
        assert!(r.bmo > 0.0 && r.lhs > 0.0 && r.ratio.is_finite());
    }
}
