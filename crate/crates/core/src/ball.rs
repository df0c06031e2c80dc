use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Euclidean ball `B_r(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ball center must be a finite point"));
        }
        Ok(Ball { center, radius })
    }

    /// `B_r(0)` in `dim` dimensions.
    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `t·B`, same center.
    pub fn dilate(&self, t: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * t,
        }
    }

    pub fn distance_to_center(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, x)| (x - c) * (x - c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance_to_center(x) < self.radius
    }

    /// True when `self ⊆ other` up to a relative slack of `1e-12`.
    pub fn inside(&self, other: &Ball) -> bool {
        other.distance_to_center(&self.center) + self.radius <= other.radius * (1.0 + 1e-12)
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    /// Distance from `x` (inside the ball) to the sphere along unit direction `u`.
    pub fn exit_distance(&self, x: &[f64], u: &[f64]) -> f64 {
        let mut b = 0.0;
        let mut d2 = 0.0;
        for ((xi, ci), ui) in x.iter().zip(&self.center).zip(u) {
            let d = xi - ci;
            b += d * ui;
            d2 += d * d;
        }
        let disc = (b * b - (d2 - self.radius * self.radius)).max(0.0);
        (-b + disc.sqrt()).max(0.0)
    }
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        n => {
            // |B_1| = 2π/n · |B_1^{n-2}|
            2.0 * PI / n as f64 * unit_ball_volume(n - 2)
        }
    }
}
