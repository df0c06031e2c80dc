//! Normalized ball quadrature.
//!
//! A rule on `B` produces nodes `x_k` and weights `w_k` with
//! `Σ w_k f(x_k) ≈ |B|⁻¹ ∫_{B∩D} f`, where `D` is an optional domain ball.
//! The polar rule is centered at a pole: the first singular point inside
//! `B∩D` if there is one, the center of `B` otherwise. Radii are split into
//! geometric panels shrinking toward the pole, so integrable point
//! singularities like `log|x|` or `|x|^{-a}` are resolved without a node at
//! the singularity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};

pub(crate) const GL6_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
pub(crate) const GL6_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_4,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_4,
];

/// Ratio between consecutive radial panel endpoints.
const PANEL_RATIO: f64 = 1.0 / 3.0;
const BASE_PANELS: usize = 8;

/// Panel tag for rules without radial structure.
pub const NO_PANEL: u16 = u16::MAX;

/// Minimum node count accepted by any scheme.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum QuadratureSpec {
    #[serde(rename = "polar-midpoint")]
    Polar { radial: usize, angular: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::Polar {
            radial: 48,
            angular: 64,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let count = match *self {
            QuadratureSpec::Polar { radial, angular } => {
                if radial == 0 || angular == 0 {
                    return Err(Error::invalid("polar quadrature needs radial and angular nodes"));
                }
                radial * angular
            }
            QuadratureSpec::MonteCarlo { samples, .. } => samples,
        };
        if count < MIN_RESOLUTION {
            return Err(Error::invalid(format!(
                "quadrature resolution {count} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        Ok(())
    }

    /// Doubles the node count in each direction.
    pub fn refined(&self) -> QuadratureSpec {
        match *self {
            QuadratureSpec::Polar { radial, angular } => QuadratureSpec::Polar {
                radial: radial * 2,
                angular: angular * 2,
            },
            QuadratureSpec::MonteCarlo { samples, seed } => QuadratureSpec::MonteCarlo {
                samples: samples * 4,
                seed,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuadratureSpec::Polar { .. } => "polar-midpoint",
            QuadratureSpec::MonteCarlo { .. } => "monte-carlo",
        }
    }

    /// Builds the rule on `ball ∩ domain`, routing around `singular`.
    pub fn rule(&self, ball: &Ball, domain: Option<&Ball>, singular: &[Vec<f64>]) -> Result<Quadrature> {
        self.validate()?;
        if let Some(d) = domain {
            if d.dim() != ball.dim() {
                return Err(Error::invalid("ball and domain dimensions differ"));
            }
            if !d.contains(&ball.center) {
                return Err(Error::Geometry(format!(
                    "ball center {:?} lies outside the domain ball",
                    ball.center
                )));
            }
        }
        match *self {
            QuadratureSpec::Polar { radial, angular } => polar_rule(ball, domain, singular, radial, angular),
            QuadratureSpec::MonteCarlo { samples, seed } => monte_carlo_rule(ball, domain, singular, samples, seed),
        }
    }
}

/// Nodes and normalized weights of a ball rule.
#[derive(Clone, Debug)]
pub struct Quadrature {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<u16>,
}

impl Quadrature {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panel(&self, k: usize) -> u16 {
        self.panels[k]
    }

    /// `|B∩D| / |B|` as seen by the rule.
    pub fn coverage(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `|B|⁻¹ Σ w_k v_k`: the integral over `B∩D` normalized by the full ball.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    /// Mean over `B∩D`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.coverage()
    }

    /// Ratio of the second to the third radial panel contribution counted
    /// from the pole. Near 1 or above means the integrand behaves at least
    /// like `|x - pole|^{-n}`, i.e. the integral diverges.
    pub fn tail_ratio(&self, values: &[f64]) -> Option<f64> {
        let mut inner = 0.0;
        let mut outer = 0.0;
        let mut seen = false;
        for ((w, v), p) in self.weights.iter().zip(values).zip(&self.panels) {
            match *p {
                1 => {
                    inner += w * v.abs();
                    seen = true;
                }
                2 => outer += w * v.abs(),
                _ => {}
            }
        }
        if !seen || outer == 0.0 {
            return None;
        }
        Some(inner / outer)
    }

    /// Divergence signal for a nonnegative integrand sampled at the nodes.
    pub fn diverges(&self, values: &[f64]) -> bool {
        if values.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD) {
            return true;
        }
        matches!(self.tail_ratio(values), Some(r) if r >= DIVERGENCE_TAIL_RATIO)
    }
}

/// Neumaier summation; rules have thousands of nodes and constants should
/// average back to themselves.
pub(crate) fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// Values above this are treated as a blow-up.
pub const OVERFLOW_GUARD: f64 = 1e200;

/// Panel-ratio threshold of [`Quadrature::diverges`].
pub const DIVERGENCE_TAIL_RATIO: f64 = 0.99;

fn pick_pole(ball: &Ball, domain: Option<&Ball>, singular: &[Vec<f64>]) -> Vec<f64> {
    for s in singular {
        if s.len() == ball.dim() && ball.contains(s) && domain.is_none_or(|d| d.contains(s)) {
            return s.clone();
        }
    }
    ball.center.clone()
}

/// Radial nodes `(r, w·r^{n-1}, panel)` on `[0, len]` for a pole at 0.
fn radial_nodes(len: f64, radial: usize, dim: usize, out: &mut Vec<(f64, f64, u16)>) {
    out.clear();
    let panels = radial.div_ceil(GL6_NODES.len()).max(1);
    // Past the base depth the panels also narrow, so refinement resolves
    // kinks away from the pole as well as the pole itself.
    let ratio = if panels > BASE_PANELS {
        PANEL_RATIO.powf((BASE_PANELS as f64 / panels as f64).sqrt())
    } else {
        PANEL_RATIO
    };
    let mut hi = len;
    for k in (0..panels).rev() {
        let lo = if k == 0 { 0.0 } else { hi * ratio };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in GL6_NODES.iter().zip(&GL6_WEIGHTS) {
            let r = mid + half * x;
            out.push((r, half * w * r.powi(dim as i32 - 1), k as u16));
        }
        hi = lo;
    }
}

fn polar_rule(
    ball: &Ball,
    domain: Option<&Ball>,
    singular: &[Vec<f64>],
    radial: usize,
    angular: usize,
) -> Result<Quadrature> {
    let dim = ball.dim();
    let pole = pick_pole(ball, domain, singular);
    let volume = ball.volume();
    let mut directions: Vec<(Vec<f64>, f64)> = Vec::new();
    match dim {
        2 => {
            let dt = 2.0 * PI / angular as f64;
            for j in 0..angular {
                let t = dt * (j as f64 + 0.5);
                directions.push((vec![t.cos(), t.sin()], dt));
            }
        }
        3 => {
            let dphi = 2.0 * PI / angular as f64;
            let polar = (angular / 2).max(6);
            let polar_panels = polar.div_ceil(6);
            let dz = 2.0 / polar_panels as f64;
            for pz in 0..polar_panels {
                let mid = -1.0 + dz * (pz as f64 + 0.5);
                for (x, w) in GL6_NODES.iter().zip(&GL6_WEIGHTS) {
                    let z = mid + 0.5 * dz * x;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for j in 0..angular {
                        let t = dphi * (j as f64 + 0.5);
                        directions.push((vec![s * t.cos(), s * t.sin(), z], dphi * 0.5 * dz * w));
                    }
                }
            }
        }
        _ => {
            return Err(Error::invalid(format!(
                "polar quadrature supports dimensions 2 and 3, got {dim}"
            )))
        }
    }

    let mut coords = Vec::with_capacity(directions.len() * radial * dim);
    let mut weights = Vec::with_capacity(directions.len() * radial);
    let mut panels = Vec::with_capacity(directions.len() * radial);
    let mut rad = Vec::new();
    for (u, dw) in &directions {
        let mut len = ball.exit_distance(&pole, u);
        if let Some(d) = domain {
            len = len.min(d.exit_distance(&pole, u));
        }
        if len <= 0.0 {
            continue;
        }
        radial_nodes(len, radial, dim, &mut rad);
        for &(r, w, panel) in &rad {
            let x: Vec<f64> = pole.iter().zip(u).map(|(p, u)| p + r * u).collect();
            coords.extend_from_slice(&x);
            weights.push(w * dw / volume);
            panels.push(panel);
        }
    }
    if weights.is_empty() {
        return Err(Error::QuadratureFailure("polar rule produced no nodes".into()));
    }
    Ok(Quadrature {
        dim,
        coords,
        weights,
        panels,
    })
}

fn monte_carlo_rule(
    ball: &Ball,
    domain: Option<&Ball>,
    singular: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<Quadrature> {
    let dim = ball.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(samples * dim);
    let mut kept = 0usize;
    let mut attempts = 0usize;
    let budget = samples.saturating_mul(10);
    let mut x = vec![0.0; dim];
    let mut drawn = 0usize;
    while drawn < samples {
        attempts += 1;
        if attempts > budget {
            return Err(Error::QuadratureFailure(format!(
                "monte-carlo sampling exhausted {budget} attempts"
            )));
        }
        let mut norm = 0.0;
        for xi in x.iter_mut() {
            *xi = rng.sample::<f64, _>(StandardNormal);
            norm += *xi * *xi;
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = ball.radius * rng.random::<f64>().powf(1.0 / dim as f64);
        for (xi, c) in x.iter_mut().zip(&ball.center) {
            *xi = c + r * *xi / norm;
        }
        let hits_singular = singular.iter().any(|s| {
            s.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < 1e-300
        });
        if hits_singular {
            continue;
        }
        drawn += 1;
        if domain.is_none_or(|d| d.contains(&x)) {
            coords.extend_from_slice(&x);
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::QuadratureFailure("no monte-carlo sample landed in the domain".into()));
    }
    Ok(Quadrature {
        dim,
        coords,
        weights: vec![1.0 / samples as f64; kept],
        panels: vec![NO_PANEL; kept],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(r: f64) -> Ball {
        Ball::centered(2, r).unwrap()
    }

    #[test]
    fn weights_sum_to_one() {
        let q = QuadratureSpec::default().rule(&disk(1.0), None, &[]).unwrap();
        assert!((q.coverage() - 1.0).abs() < 1e-12);
        let off = Ball::new(vec![0.3, -0.2], 0.5).unwrap();
        let q = QuadratureSpec::default().rule(&off, None, &[vec![0.1, 0.0]]).unwrap();
        assert!((q.coverage() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_weights_sum_to_one() {
        let b = Ball::centered(3, 2.0).unwrap();
        let q = QuadratureSpec::default().rule(&b, None, &[]).unwrap();
        assert!((q.coverage() - 1.0).abs() < 1e-12);
        let vals: Vec<f64> = q.points().map(|x| x[0] * x[0]).collect();
        // ⨍_{B_R} x₁² = R²/5 in three dimensions
        assert!((q.mean(&vals) - 0.8).abs() < 1e-10);
    }

    #[test]
    fn clipped_coverage_matches_lens_area() {
        // lens between B_0.2((0.9, 0)) and the unit disk
        let b = Ball::new(vec![0.9, 0.0], 0.2).unwrap();
        let q = QuadratureSpec::Polar { radial: 96, angular: 512 }
            .rule(&b, Some(&disk(1.0)), &[])
            .unwrap();
        let lens = lens_area(1.0, 0.2, 0.9);
        assert!((q.coverage() - lens / b.volume()).abs() < 1e-3);
    }

    fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
        let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).acos();
        let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).acos();
        r1 * r1 * (a1 - a1.sin() * a1.cos()) + r2 * r2 * (a2 - a2.sin() * a2.cos())
    }

    #[test]
    fn no_node_at_the_singularity() {
        let s = vec![0.0, 0.0];
        let q = QuadratureSpec::default().rule(&disk(1.0), None, &[s]).unwrap();
        assert!(q.points().all(|x| x[0].hypot(x[1]) > 0.0));
    }

    #[test]
    fn log_singularity_is_resolved() {
        let q = QuadratureSpec::default().rule(&disk(1.0), None, &[vec![0.0, 0.0]]).unwrap();
        let vals: Vec<f64> = q.points().map(|x| x[0].hypot(x[1]).ln()).collect();
        assert!((q.mean(&vals) + 0.5).abs() < 1e-8, "{}", q.mean(&vals));
    }

    #[test]
    fn divergence_signal() {
        let q = QuadratureSpec::default().rule(&disk(1.0), None, &[vec![0.0, 0.0]]).unwrap();
        let r = |x: &[f64]| x[0].hypot(x[1]);
        let bad: Vec<f64> = q.points().map(|x| r(x).powf(-2.4)).collect();
        let good: Vec<f64> = q.points().map(|x| r(x).powf(-1.2)).collect();
        assert!(q.diverges(&bad));
        assert!(!q.diverges(&good));
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let spec = QuadratureSpec::MonteCarlo { samples: 1000, seed: 7 };
        let a = spec.rule(&disk(1.0), None, &[]).unwrap();
        let b = spec.rule(&disk(1.0), None, &[]).unwrap();
        assert_eq!(a.coords, b.coords);
        assert!(a.points().all(|x| x[0].hypot(x[1]) < 1.0));
    }

    #[test]
    fn resolution_floor() {
        let spec = QuadratureSpec::Polar { radial: 2, angular: 4 };
        assert!(spec.rule(&disk(1.0), None, &[]).is_err());
    }

    #[test]
    fn center_outside_domain_is_a_geometry_error() {
        let b = Ball::new(vec![2.0, 0.0], 0.5).unwrap();
        let err = QuadratureSpec::default().rule(&b, Some(&disk(1.0)), &[]).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }
}
