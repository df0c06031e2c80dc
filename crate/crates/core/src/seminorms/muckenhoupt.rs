//! Sampled Muckenhoupt constants `sup_B (⨍ωᵖ)^{1/p} (⨍ω^{-p'})^{1/p'}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::nfunctions::conjugate_exponent;
use crate::seminorms::bmo::argmax;
use crate::seminorms::family::BallFamily;
use crate::weights::field::ScalarWeightField;
use crate::weights::means::sample_scalar;
use crate::weights::quadrature::QuadratureSpec;

#[derive(Clone, Debug, Serialize)]
pub struct BallAp {
    /// `(⨍ωᵖ)^{1/p}`
    pub positive: f64,
    /// `(⨍ω^{-p'})^{1/p'}`
    pub negative: f64,
    /// `⟨ω⟩^log`
    pub log_mean: f64,
    pub divergent: bool,
}

impl BallAp {
    pub fn product(&self) -> f64 {
        self.positive * self.negative
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ApEstimate {
    Finite {
        value: f64,
        attaining_ball: Ball,
        per_ball: Vec<BallAp>,
    },
    /// One of the two integrals blows up on `ball`.
    Divergent { ball: Ball, per_ball: Vec<BallAp> },
}

impl ApEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            ApEstimate::Finite { value, .. } => Some(*value),
            ApEstimate::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, ApEstimate::Divergent { .. })
    }

    pub fn per_ball(&self) -> &[BallAp] {
        match self {
            ApEstimate::Finite { per_ball, .. } | ApEstimate::Divergent { per_ball, .. } => per_ball,
        }
    }
}

/// `(⨍ω^a)^{1/a}` and `(⨍ω^{-b})^{1/b}` on one ball with divergence detection.
pub fn ball_power_means(w: &ScalarWeightField, ball: &Ball, domain: Option<&Ball>, a: f64, b: f64, q: &QuadratureSpec) -> Result<BallAp> {
    let rule = q.rule(ball, domain, w.singular_points())?;
    let v = sample_scalar(w.as_field(), &rule)?;
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let pos: Vec<f64> = v.iter().map(|x| x.powf(a)).collect();
    let neg: Vec<f64> = v.iter().map(|x| x.powf(-b)).collect();
    let divergent = rule.diverges(&pos) || rule.diverges(&neg);
    Ok(BallAp {
        positive: rule.mean(&pos).powf(1.0 / a),
        negative: rule.mean(&neg).powf(1.0 / b),
        log_mean: rule.mean(&logs).exp(),
        divergent,
    })
}

pub fn muckenhoupt_ap(w: &ScalarWeightField, p: f64, fam: &BallFamily, q: &QuadratureSpec) -> Result<ApEstimate> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("exponent p must lie in (1, inf), got {p}")));
    }
    if fam.is_empty() {
        return Err(Error::invalid("ball family is empty"));
    }
    let pc = conjugate_exponent(p);
    let per_ball = fam
        .balls()
        .par_iter()
        .map(|b| ball_power_means(w, b, Some(&fam.domain), p, pc, q))
        .collect::<Result<Vec<BallAp>>>()?;
    if let Some(k) = per_ball.iter().position(|b| b.divergent) {
        return Ok(ApEstimate::Divergent {
            ball: fam.balls()[k].clone(),
            per_ball,
        });
    }
    let products: Vec<f64> = per_ball.iter().map(BallAp::product).collect();
    let (k, value) = argmax(&products).ok_or_else(|| Error::QuadratureFailure("no finite A_p value".into()))?;
    Ok(ApEstimate::Finite {
        value,
        attaining_ball: fam.balls()[k].clone(),
        per_ball,
    })
}
