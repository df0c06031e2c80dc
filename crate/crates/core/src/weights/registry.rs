//! Named analytic weight families, constructible from config.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meyers::{MeyersExample, Variant};
use crate::weights::field::WeightField;
use crate::weights::spd::{spd_exp, sym_norm, SpdMatrix};

pub const FAMILIES: &[&str] = &["constant", "rank-one-radial", "power-radial", "log-normal", "example"];

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `c·I`
    Constant {
        #[serde(default = "two")]
        dim: usize,
        #[serde(default = "one")]
        value: f64,
    },
    /// `θ I + (1-θ) x̂⊗x̂`
    RankOneRadial {
        #[serde(default = "two")]
        dim: usize,
        theta: f64,
    },
    /// `|x|^a (θ I + (1-θ) x̂⊗x̂)`
    PowerRadial {
        #[serde(default = "two")]
        dim: usize,
        exponent: f64,
        #[serde(default = "one")]
        theta: f64,
    },
    /// `exp(H(x))` with `H` a seeded random trigonometric sum of symmetric matrices.
    LogNormal {
        #[serde(default = "two")]
        dim: usize,
        sigma: f64,
        #[serde(default = "default_modes")]
        modes: usize,
        seed: u64,
        #[serde(default = "one")]
        length_scale: f64,
    },
    Example {
        variant: Variant,
        #[serde(default = "two")]
        n: usize,
        eps: f64,
        #[serde(default)]
        theta: Option<f64>,
    },
}

fn default_modes() -> usize {
    8
}

impl WeightSpec {
    pub fn dim(&self) -> usize {
        match *self {
            WeightSpec::Constant { dim, .. }
            | WeightSpec::RankOneRadial { dim, .. }
            | WeightSpec::PowerRadial { dim, .. }
            | WeightSpec::LogNormal { dim, .. } => dim,
            WeightSpec::Example { n, .. } => n,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            WeightSpec::Constant { .. } => "constant",
            WeightSpec::RankOneRadial { .. } => "rank-one-radial",
            WeightSpec::PowerRadial { .. } => "power-radial",
            WeightSpec::LogNormal { .. } => "log-normal",
            WeightSpec::Example { .. } => "example",
        }
    }

    pub fn build(&self) -> Result<WeightField> {
        if self.dim() < 1 {
            return Err(Error::invalid("weight dimension must be positive"));
        }
        match *self {
            WeightSpec::Constant { dim, value } => {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::invalid(format!("constant weight must be positive, got {value}")));
                }
                let c = SpdMatrix::new(DMatrix::identity(dim, dim) * value)?;
                Ok(WeightField::constant(c, format!("constant({value})")))
            }
            WeightSpec::RankOneRadial { dim, theta } => {
                check_theta(theta)?;
                Ok(rank_one_radial(dim, theta))
            }
            WeightSpec::PowerRadial { dim, exponent, theta } => {
                check_theta(theta)?;
                if !exponent.is_finite() {
                    return Err(Error::invalid("power-radial exponent must be finite"));
                }
                Ok(power_radial(dim, exponent, theta))
            }
            WeightSpec::LogNormal {
                dim,
                sigma,
                modes,
                seed,
                length_scale,
            } => log_normal(dim, sigma, modes, seed, length_scale),
            WeightSpec::Example { variant, n, eps, theta } => {
                let mut ex = MeyersExample::new(variant, n, eps)?;
                if let Some(t) = theta {
                    ex = ex.with_theta(t)?;
                }
                Ok(ex.weight_field())
            }
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("theta must lie in (0, 1], got {theta}")))
    }
}

fn radial_matrix(x: &[f64], theta: f64, scale: f64) -> Result<SpdMatrix> {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2.sqrt() < crate::meyers::ORIGIN_CUTOFF {
        return Err(Error::SingularPoint { point: x.to_vec() });
    }
    let mut m = DMatrix::identity(n, n) * theta;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += (1.0 - theta) * x[i] * x[j] / r2;
        }
    }
    SpdMatrix::new(m * scale)
}

/// `θ I + (1-θ) x̂⊗x̂`, the bounded weight of the plain example.
pub fn rank_one_radial(dim: usize, theta: f64) -> WeightField {
    WeightField::new(dim, format!("rank-one-radial(theta={theta})"), move |x| radial_matrix(x, theta, 1.0))
        .with_singular_point(vec![0.0; dim])
        .with_condition_bound(1.0 / theta)
}

/// `|x|^a (θ I + (1-θ) x̂⊗x̂)`.
pub fn power_radial(dim: usize, exponent: f64, theta: f64) -> WeightField {
    WeightField::new(
        dim,
        format!("power-radial(exponent={exponent}, theta={theta})"),
        move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            radial_matrix(x, theta, r.powf(exponent))
        },
    )
    .with_singular_point(vec![0.0; dim])
    .with_condition_bound(1.0 / theta)
}

/// `M = exp(H)`, `H(x) = σ m^{-1/2} Σ_k S_k cos(2π k_k·x/ℓ + φ_k)` with
/// standard normal symmetric `S_k`, wave vectors `k_k` and uniform phases.
pub fn log_normal(dim: usize, sigma: f64, modes: usize, seed: u64, length_scale: f64) -> Result<WeightField> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    if modes == 0 {
        return Err(Error::invalid("log-normal weight needs at least one mode"));
    }
    if !(length_scale > 0.0) {
        return Err(Error::invalid("length_scale must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = sigma / (modes as f64).sqrt();
    let mut terms = Vec::with_capacity(modes);
    let mut bound = 0.0;
    for _ in 0..modes {
        let mut s = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = rng.sample(StandardNormal);
                let v = if i == j { v } else { v / 2f64.sqrt() };
                s[(i, j)] = v * amp;
                s[(j, i)] = v * amp;
            }
        }
        let k: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 * PI / length_scale)
            .collect();
        let phase = rng.random_range(0.0..2.0 * PI);
        bound += sym_norm(&s);
        terms.push((s, k, phase));
    }
    let field = WeightField::new(
        dim,
        format!("log-normal(sigma={sigma}, modes={modes}, seed={seed}, length_scale={length_scale})"),
        move |x| {
            let mut h = DMatrix::<f64>::zeros(x.len(), x.len());
            for (s, k, phase) in &terms {
                let arg: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + phase;
                h += s * arg.cos();
            }
            spd_exp(&h)
        },
    );
    Ok(field.with_condition_bound((2.0 * bound).exp()))
}
