//! Exact solutions showing that the log-BMO smallness threshold is sharp.
//!
//! Both constructions use `u(x) = |x|^{1-e} x̂₁` and the weight
//! `M(x) = |x|^{-d}(θ I + (1-θ) x̂⊗x̂)`:
//!
//! * plain: `e = ε`, `d = 0`, a bounded weight with `|log M| ≤ ε`;
//! * degenerate: `e = ε/2`, `d = ε/2`, a weight that is unbounded at the
//!   origin while `log M` stays small in BMO.
//!
//! For a flux `|x|^{-α}(θ² e₁ + (1-e-θ²) x̂ x̂₁)` the divergence is
//! `|x|^{-α-1} x̂₁ (-α(1-e) + (1-e-θ²)(n-1))`. For `M²∇u` the exponent is
//! `α = e + 2d`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::field::{ScalarWeightField, WeightField};
use crate::weights::spd::SpdMatrix;

/// Points with `|x|` below this are treated as the singular origin.
pub const ORIGIN_CUTOFF: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    Degenerate,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Degenerate => "degenerate",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "degenerate" => Ok(Variant::Degenerate),
            other => Err(Error::invalid(format!(
                "unknown example variant {other:?} (expected plain or degenerate)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeyersExample {
    pub variant: Variant,
    pub n: usize,
    pub eps: f64,
    /// Replaces the balancing `θ`; used for negative controls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl MeyersExample {
    pub fn new(variant: Variant, n: usize, eps: f64) -> Result<Self> {
        let ex = MeyersExample {
            variant,
            n,
            eps,
            theta: None,
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn plain(n: usize, eps: f64) -> Result<Self> {
        Self::new(Variant::Plain, n, eps)
    }

    pub fn degenerate(n: usize, eps: f64) -> Result<Self> {
        Self::new(Variant::Degenerate, n, eps)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1], got {theta}")));
        }
        self.theta = Some(theta);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {}", self.n)));
        }
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::invalid(format!("eps must lie in (0, 1/2], got {}", self.eps)));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(format!("theta must lie in (0, 1], got {t}")));
            }
        }
        Ok(())
    }

    /// Exponent loss `e` in `u = |x|^{1-e} x̂₁`.
    pub fn gradient_exponent(&self) -> f64 {
        match self.variant {
            Variant::Plain => self.eps,
            Variant::Degenerate => 0.5 * self.eps,
        }
    }

    /// `d` in the prefactor `|x|^{-d}` of `M`.
    pub fn weight_exponent(&self) -> f64 {
        match self.variant {
            Variant::Plain => 0.0,
            Variant::Degenerate => 0.5 * self.eps,
        }
    }

    /// The balancing `θ` of the variant, or the override.
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| theta_of(self.variant, self.n, self.eps))
    }

    /// `Λ = 1/θ`.
    pub fn condition_bound(&self) -> f64 {
        1.0 / self.theta()
    }

    pub fn u(&self, x: &[f64]) -> Result<f64> {
        let r = self.radius(x)?;
        Ok(r.powf(1.0 - self.gradient_exponent()) * x[0] / r)
    }

    /// `|x|^{-e}(e₁ - e x̂ x̂₁)`.
    pub fn grad_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.radius(x)?;
        let e = self.gradient_exponent();
        let s = r.powf(-e);
        let x1 = x[0] / r;
        Ok(x.iter()
            .enumerate()
            .map(|(i, xi)| {
                let e1 = if i == 0 { 1.0 } else { 0.0 };
                s * (e1 - e * (xi / r) * x1)
            })
            .collect())
    }

    pub fn weight(&self, x: &[f64]) -> Result<SpdMatrix> {
        let r = self.radius(x)?;
        let theta = self.theta();
        let scale = r.powf(-self.weight_exponent());
        let n = x.len();
        let mut m = DMatrix::identity(n, n) * theta;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += (1.0 - theta) * x[i] * x[j] / (r * r);
            }
        }
        SpdMatrix::new(m * scale)
    }

    /// `M²∇u = |x|^{-(e+2d)}(θ² e₁ + (1-e-θ²) x̂ x̂₁)`.
    pub fn flux(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.radius(x)?;
        let e = self.gradient_exponent();
        let alpha = e + 2.0 * self.weight_exponent();
        let t2 = self.theta().powi(2);
        let s = r.powf(-alpha);
        let x1 = x[0] / r;
        Ok(x.iter()
            .enumerate()
            .map(|(i, xi)| {
                let e1 = if i == 0 { t2 } else { 0.0 };
                s * (e1 + (1.0 - e - t2) * (xi / r) * x1)
            })
            .collect())
    }

    /// Coefficient `c` with `div(M²∇u) = c |x|^{-α-1} x̂₁` for the actual `M²`.
    pub fn actual_divergence_coefficient(&self) -> f64 {
        let e = self.gradient_exponent();
        let alpha = e + 2.0 * self.weight_exponent();
        let t2 = self.theta().powi(2);
        -alpha * (1.0 - e) + (1.0 - e - t2) * (self.n as f64 - 1.0)
    }

    /// Balancing `θ` for the actual `M²` (equal to [`theta_of`] for the
    /// plain variant). `None` when no `θ ∈ (0, 1)` balances the divergence.
    pub fn balancing_theta(&self) -> Option<f64> {
        let e = self.gradient_exponent();
        let alpha = e + 2.0 * self.weight_exponent();
        let t2 = 1.0 - e - alpha * (1.0 - e) / (self.n as f64 - 1.0);
        (t2 > 0.0 && t2 < 1.0).then(|| t2.sqrt())
    }

    pub fn weight_field(&self) -> WeightField {
        let ex = self.clone();
        WeightField::new(self.n, self.label(), move |x| ex.weight(x))
            .with_singular_point(vec![0.0; self.n])
            .with_condition_bound(self.condition_bound())
    }

    /// `|∇u|` as a positive field.
    pub fn grad_norm_field(&self) -> ScalarWeightField {
        let ex = self.clone();
        ScalarWeightField::new(self.n, format!("|grad u| {}", self.label()), move |x| {
            Ok(ex.grad_u(x)?.iter().map(|g| g * g).sum::<f64>().sqrt())
        })
        .with_singular_point(vec![0.0; self.n])
    }

    pub fn label(&self) -> String {
        let mut s = format!("{}(n={}, eps={})", self.variant.name(), self.n, self.eps);
        if let Some(t) = self.theta {
            s.push_str(&format!("[theta={t}]"));
        }
        s
    }

    fn radius(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "example is {}-dimensional, got a point of length {}",
                self.n,
                x.len()
            )));
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < ORIGIN_CUTOFF {
            return Err(Error::SingularPoint { point: x.to_vec() });
        }
        Ok(r)
    }
}

/// `θ` of the variant: `√(1-ε-ε(1-ε)/(n-1))` for plain and
/// `√(1-ε/2-ε(1-ε)/(2(n-1)))` for degenerate.
pub fn theta_of(variant: Variant, n: usize, eps: f64) -> f64 {
    let m = n as f64 - 1.0;
    match variant {
        Variant::Plain => (1.0 - eps - eps * (1.0 - eps) / m).sqrt(),
        Variant::Degenerate => (1.0 - 0.5 * eps - eps * (1.0 - eps) / (2.0 * m)).sqrt(),
    }
}

/// Divergence coefficient of the stated balance law: `-ε(1-ε) + (1-ε-θ²)(n-1)`
/// for plain and `-(ε/2)(1-ε) + (1-ε/2-θ²)(n-1)` for degenerate.
pub fn divergence_identity(ex: &MeyersExample) -> f64 {
    let (eps, m, t2) = (ex.eps, ex.n as f64 - 1.0, ex.theta().powi(2));
    match ex.variant {
        Variant::Plain => -eps * (1.0 - eps) + (1.0 - eps - t2) * m,
        Variant::Degenerate => -0.5 * eps * (1.0 - eps) + (1.0 - 0.5 * eps - t2) * m,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    Finite,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IntegrabilityReport {
    /// `∫|∇u|^ρ`
    pub gradient: Integrability,
    /// `∫(|∇u| ω)^ρ`
    pub weighted: Integrability,
}

/// Decides local integrability at the origin from the radial exponent:
/// `∫_{B_1} |x|^{-aρ} dx < ∞` iff `aρ < n`. The borderline is infinite.
pub fn integrability_threshold(ex: &MeyersExample, rho: f64) -> Result<IntegrabilityReport> {
    if !(rho >= 1.0) {
        return Err(Error::invalid(format!("rho must be at least 1, got {rho}")));
    }
    let n = ex.n as f64;
    let class = |a: f64| {
        if a * rho < n {
            Integrability::Finite
        } else {
            Integrability::Infinite
        }
    };
    let e = ex.gradient_exponent();
    Ok(IntegrabilityReport {
        gradient: class(e),
        weighted: class(e + ex.weight_exponent()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfunctions::weighted_maps;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn theta_examples() {
        assert_relative_eq!(theta_of(Variant::Plain, 2, 0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(theta_of(Variant::Plain, 3, 0.25), 0.65625f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(theta_of(Variant::Degenerate, 2, 0.5), 0.625f64.sqrt(), max_relative = 1e-15);
        // n = 2 reduces to θ = 1 - ε
        assert_relative_eq!(theta_of(Variant::Plain, 2, 0.3), 0.7, max_relative = 1e-15);
    }

    #[test]
    fn theta_range() {
        for v in [Variant::Plain, Variant::Degenerate] {
            for n in 2..6 {
                for k in 1..=50 {
                    let t = theta_of(v, n, 0.01 * k as f64);
                    assert!((0.5 - 1e-15..1.0).contains(&t));
                }
            }
        }
    }

    #[test]
    fn invalid_eps() {
        assert!(MeyersExample::plain(2, 0.0).is_err());
        assert!(MeyersExample::plain(2, 0.6).is_err());
        assert!(MeyersExample::plain(1, 0.2).is_err());
    }

    #[test]
    fn pointwise_values() {
        let ex = MeyersExample::plain(2, 0.25).unwrap();
        assert_relative_eq!(ex.u(&[1.0, 0.0]).unwrap(), 1.0);
        let g = ex.grad_u(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.75);
        assert_eq!(g[1], 0.0);
        assert_eq!(ex.u(&[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ex.grad_u(&[0.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(ex.u(&[0.0, 0.0]), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ex in [
            MeyersExample::plain(2, 0.3).unwrap(),
            MeyersExample::degenerate(3, 0.5).unwrap(),
        ] {
            for _ in 0..100 {
                let x: Vec<f64> = (0..ex.n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let g = ex.grad_u(&x).unwrap();
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                for i in 0..ex.n {
                    let h = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (ex.u(&xp).unwrap() - ex.u(&xm).unwrap()) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-6 * gn.max(1.0));
                }
            }
        }
    }

    #[test]
    fn weight_examples() {
        let ex = MeyersExample::plain(2, 0.5).unwrap();
        let m = ex.weight(&[1.0, 0.0]).unwrap();
        assert!((m.as_matrix() - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5]))).abs().max() < 1e-15);

        let log = crate::weights::spd::spd_log(&ex.weight(&[0.6, -0.8]).unwrap());
        let xh = [0.6, -0.8];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                let expect = 0.5f64.ln() * (id - xh[i] * xh[j]);
                assert!((log[(i, j)] - expect).abs() < 1e-14);
            }
        }

        let ex = MeyersExample::degenerate(2, 0.5).unwrap();
        let m = ex.weight(&[0.01, 0.0]).unwrap();
        assert_relative_eq!(m.spectral_norm(), 0.01f64.powf(-0.25), max_relative = 1e-13);
    }

    #[test]
    fn divergence_identity_vanishes_at_theta() {
        for v in [Variant::Plain, Variant::Degenerate] {
            for n in [2, 3] {
                for eps in [0.1, 0.25, 0.5] {
                    let ex = MeyersExample::new(v, n, eps).unwrap();
                    assert!(divergence_identity(&ex).abs() < 1e-14);
                }
            }
        }
        let ex = MeyersExample::plain(2, 0.5).unwrap().with_theta(1.0).unwrap();
        assert_relative_eq!(divergence_identity(&ex), -0.75, max_relative = 1e-15);
    }

    #[test]
    fn plain_variant_is_divergence_free() {
        for n in [2, 3, 4] {
            let ex = MeyersExample::plain(n, 0.3).unwrap();
            assert!(ex.actual_divergence_coefficient().abs() < 1e-14);
            assert_relative_eq!(ex.balancing_theta().unwrap(), ex.theta(), max_relative = 1e-14);
        }
    }

    #[test]
    fn flux_matches_weighted_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ex in [
            MeyersExample::plain(2, 0.5).unwrap(),
            MeyersExample::degenerate(3, 0.25).unwrap(),
        ] {
            for _ in 0..50 {
                let x: Vec<f64> = (0..ex.n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let m = ex.weight(&x).unwrap();
                let g = ex.grad_u(&x).unwrap();
                let direct = weighted_maps(&m, 2.0, &g).cal_a;
                let closed = ex.flux(&x).unwrap();
                let scale = closed.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (a, b) in direct.iter().zip(&closed) {
                    assert!((a - b).abs() <= 1e-10 * scale.max(1.0));
                }
            }
        }
        let ex = MeyersExample::plain(2, 0.5).unwrap();
        let f = ex.flux(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn integrability() {
        let ex = MeyersExample::plain(2, 0.5).unwrap();
        assert_eq!(integrability_threshold(&ex, 3.9).unwrap().gradient, Integrability::Finite);
        assert_eq!(integrability_threshold(&ex, 4.0).unwrap().gradient, Integrability::Infinite);
        let ex = MeyersExample::degenerate(2, 0.5).unwrap();
        let r = integrability_threshold(&ex, 7.0).unwrap();
        assert_eq!(r.gradient, Integrability::Finite);
        assert_eq!(r.weighted, Integrability::Infinite);
        assert!(integrability_threshold(&ex, 0.5).is_err());
    }

    #[test]
    fn condition_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ex in [
            MeyersExample::plain(2, 0.5).unwrap(),
            MeyersExample::degenerate(2, 0.5).unwrap(),
            MeyersExample::degenerate(3, 0.1).unwrap(),
        ] {
            for _ in 0..100 {
                let x: Vec<f64> = (0..ex.n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = crate::weights::spd::condition_number(&ex.weight(&x).unwrap());
                assert!(c <= 2.0 + 1e-12);
            }
        }
    }
}
