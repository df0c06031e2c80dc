//! Sampled local BMO seminorms.
//!
//! For a ball `B = B_r(x)` of a family over the domain `B_R` the per-ball
//! oscillation is `|B|⁻¹ ∫_{B∩B_R} |f - ⟨f⟩| dx`, where `⟨f⟩` is the mean
//! over `B∩B_R` and the normalization uses the full `|B|`. The estimate is
//! the maximum over the family and so a lower bound for the seminorm.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::seminorms::family::BallFamily;
use crate::weights::field::{MatrixField, ScalarField};
use crate::weights::means::{matrix_mean, sample_matrix, sample_scalar};
use crate::weights::quadrature::QuadratureSpec;
use crate::weights::spd::sym_norm;

#[derive(Clone, Debug, Serialize)]
pub struct BmoEstimate {
    pub value: f64,
    pub attaining_ball: Ball,
    pub ball_count: usize,
    pub family_id: String,
    pub quadrature: QuadratureSpec,
    /// Oscillation of every family member, in family order.
    pub per_ball: Vec<f64>,
}

impl BmoEstimate {
    fn from_values(per_ball: Vec<f64>, fam: &BallFamily, q: &QuadratureSpec) -> Result<Self> {
        let (k, value) = argmax(&per_ball)
            .ok_or_else(|| Error::QuadratureFailure("no finite per-ball value".into()))?;
        Ok(BmoEstimate {
            value,
            attaining_ball: fam.balls()[k].clone(),
            ball_count: fam.len(),
            family_id: fam.id.clone(),
            quadrature: q.clone(),
            per_ball,
        })
    }

    /// The estimate over `fam` followed by the balls of `extra`, reusing
    /// the per-ball values already computed.
    pub fn extended(&self, extra: &BmoEstimate, fam: &BallFamily, extended_fam: &BallFamily) -> Result<Self> {
        if extended_fam.len() != self.per_ball.len() + extra.per_ball.len() {
            return Err(Error::invalid("extended family does not match the two estimates"));
        }
        let per_ball = self.per_ball.iter().chain(&extra.per_ball).copied().collect();
        let mut e = BmoEstimate::from_values(per_ball, extended_fam, &self.quadrature)?;
        e.family_id = format!("{}+{}", fam.id, extra.family_id);
        Ok(e)
    }

    /// Running maximum over the family order.
    pub fn running_max(&self) -> Vec<f64> {
        let mut m = f64::NEG_INFINITY;
        self.per_ball
            .iter()
            .map(|v| {
                m = m.max(*v);
                m
            })
            .collect()
    }
}

/// First index attaining the maximum.
pub(crate) fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if *v <= b => {}
            _ => best = Some((k, *v)),
        }
    }
    best
}

pub fn bmo_scalar(f: &ScalarField, fam: &BallFamily, q: &QuadratureSpec) -> Result<BmoEstimate> {
    if fam.is_empty() {
        return Err(Error::invalid("ball family is empty"));
    }
    let per_ball = fam
        .balls()
        .par_iter()
        .map(|b| {
            let rule = q.rule(b, Some(&fam.domain), f.singular_points())?;
            let v = sample_scalar(f, &rule)?;
            let mean = rule.mean(&v);
            let dev: Vec<f64> = v.iter().map(|x| (x - mean).abs()).collect();
            Ok(rule.integrate(&dev))
        })
        .collect::<Result<Vec<f64>>>()?;
    BmoEstimate::from_values(per_ball, fam, q)
}

/// As [`bmo_scalar`] with the spectral-norm oscillation `|H(x) - ⟨H⟩|`.
pub fn bmo_matrix(h: &MatrixField, fam: &BallFamily, q: &QuadratureSpec) -> Result<BmoEstimate> {
    if fam.is_empty() {
        return Err(Error::invalid("ball family is empty"));
    }
    let per_ball = fam
        .balls()
        .par_iter()
        .map(|b| {
            let rule = q.rule(b, Some(&fam.domain), h.singular_points())?;
            let v = sample_matrix(h, &rule)?;
            let mean = matrix_mean(&v, &rule);
            let dev: Vec<f64> = v.iter().map(|x| sym_norm(&(x - &mean))).collect();
            Ok(rule.integrate(&dev))
        })
        .collect::<Result<Vec<f64>>>()?;
    BmoEstimate::from_values(per_ball, fam, q)
}

/// `x ↦ log(t) I + H(x)`, for scale-invariance checks.
pub fn shifted_log(h: &MatrixField, t: f64) -> MatrixField {
    let s = t.ln();
    h.map(format!("log({t})+{}", h.label()), move |m: DMatrix<f64>| {
        let n = m.nrows();
        Ok(m + DMatrix::identity(n, n) * s)
    })
}
