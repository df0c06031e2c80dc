use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// Radii `R 2^{-k}`, `k < levels`; centers on a lattice of spacing `r/density`.
    DyadicGrid {
        levels: usize,
        #[serde(default = "default_density")]
        density: f64,
    },
    /// `count` seeded centers, radii drawn from the dyadic list.
    Random { levels: usize, count: usize, seed: u64 },
}

fn default_density() -> f64 {
    2.0
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec::DyadicGrid {
            levels: 4,
            density: 2.0,
        }
    }
}

impl FamilySpec {
    pub fn build(&self, domain: &Ball) -> Result<BallFamily> {
        match *self {
            FamilySpec::DyadicGrid { levels, density } => BallFamily::dyadic_grid(domain.clone(), levels, density),
            FamilySpec::Random { levels, count, seed } => BallFamily::random(domain.clone(), levels, count, seed),
        }
    }
}

/// A finite set of balls inside a domain ball, in a fixed order.
#[derive(Clone, Debug, Serialize)]
pub struct BallFamily {
    pub id: String,
    pub domain: Ball,
    pub radii: Vec<f64>,
    balls: Vec<Ball>,
    density: f64,
}

impl BallFamily {
    /// Wraps explicit balls; every center must lie in the domain.
    pub fn from_balls(id: impl Into<String>, domain: Ball, balls: Vec<Ball>) -> Result<Self> {
        for b in &balls {
            check_member(&domain, b)?;
        }
        let mut radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
        radii.sort_by(|a, b| b.total_cmp(a));
        radii.dedup();
        Ok(BallFamily {
            id: id.into(),
            domain,
            radii,
            balls,
            density: default_density(),
        })
    }

    pub fn dyadic_grid(domain: Ball, levels: usize, density: f64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("ball family needs at least one level"));
        }
        if !(density > 0.0) {
            return Err(Error::invalid(format!("lattice density must be positive, got {density}")));
        }
        let radii: Vec<f64> = (0..levels).map(|k| domain.radius * 0.5f64.powi(k as i32)).collect();
        let mut balls = Vec::new();
        for &r in &radii {
            let h = r / density;
            for c in lattice(&domain.center, domain.radius, h) {
                balls.push(Ball { center: c, radius: r });
            }
        }
        Ok(BallFamily {
            id: format!("dyadic-grid(levels={levels}, density={density})"),
            domain,
            radii,
            balls,
            density,
        })
    }

    pub fn random(domain: Ball, levels: usize, count: usize, seed: u64) -> Result<Self> {
        if levels == 0 || count == 0 {
            return Err(Error::invalid("random ball family needs levels and count"));
        }
        let radii: Vec<f64> = (0..levels).map(|k| domain.radius * 0.5f64.powi(k as i32)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = domain.dim();
        let mut balls = Vec::with_capacity(count);
        while balls.len() < count {
            let c: Vec<f64> = domain
                .center
                .iter()
                .map(|c| c + domain.radius * rng.random_range(-1.0..1.0))
                .collect();
            if !domain.contains(&c) {
                continue;
            }
            let r = radii[rng.random_range(0..levels)];
            balls.push(Ball { center: c, radius: r });
        }
        debug_assert!(balls.iter().all(|b| b.dim() == dim));
        Ok(BallFamily {
            id: format!("random(levels={levels}, count={count}, seed={seed})"),
            domain,
            radii,
            balls,
            density: default_density(),
        })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// One more dyadic level and a doubled lattice density.
    pub fn refined(&self) -> Result<BallFamily> {
        let levels = self.radii.len() + 1;
        let mut fine = BallFamily::dyadic_grid(self.domain.clone(), levels, 2.0 * self.density)?;
        fine.extend(self);
        Ok(fine)
    }

    /// Adds `extra_levels` levels of balls around `point`, each level
    /// `stride_halvings` dyadic halvings below the previous smallest radius.
    /// Every level holds the ball centered at `point` and its lattice
    /// neighbors at distance `r/2`.
    pub fn zoom(&self, point: &[f64], extra_levels: usize, stride_halvings: u32) -> Result<BallFamily> {
        let mut out = self.clone();
        let mut r = self.radii.iter().copied().fold(f64::INFINITY, f64::min);
        for _ in 0..extra_levels {
            r *= 0.5f64.powi(stride_halvings as i32);
            for c in lattice_around(point, r / 2.0) {
                let b = Ball { center: c, radius: r };
                if self.domain.contains(&b.center) {
                    out.balls.push(b);
                }
            }
            out.radii.push(r);
        }
        out.id = format!("{}+zoom(levels={extra_levels}, stride={stride_halvings})", self.id);
        Ok(out)
    }

    /// Appends the balls of `other` that are not already present.
    pub fn extend(&mut self, other: &BallFamily) {
        for b in &other.balls {
            if !self.balls.contains(b) {
                self.balls.push(b.clone());
            }
        }
        for r in &other.radii {
            if !self.radii.contains(r) {
                self.radii.push(*r);
            }
        }
        self.radii.sort_by(|a, b| b.total_cmp(a));
    }
}

fn check_member(domain: &Ball, b: &Ball) -> Result<()> {
    if b.dim() != domain.dim() {
        return Err(Error::invalid("ball and domain dimensions differ"));
    }
    if !domain.contains(&b.center) {
        return Err(Error::Geometry(format!("ball center {:?} lies outside the domain", b.center)));
    }
    if b.radius > domain.radius * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "ball radius {} exceeds the domain radius {}",
            b.radius, domain.radius
        )));
    }
    Ok(())
}

/// Lattice points `center + h·k`, `k ∈ ℤⁿ`, strictly inside `B_R(center)`.
fn lattice(center: &[f64], radius: f64, h: f64) -> Vec<Vec<f64>> {
    let dim = center.len();
    let k = (radius / h).ceil() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-k; dim];
    loop {
        let p: Vec<f64> = center.iter().zip(&idx).map(|(c, i)| c + h * *i as f64).collect();
        let d2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2.sqrt() < radius * (1.0 - 1e-12) {
            out.push(p);
        }
        let mut j = 0;
        loop {
            if j == dim {
                return out;
            }
            idx[j] += 1;
            if idx[j] <= k {
                break;
            }
            idx[j] = -k;
            j += 1;
        }
    }
}

/// `point` and its `2n` axis neighbors at distance `h`.
fn lattice_around(point: &[f64], h: f64) -> Vec<Vec<f64>> {
    let mut out = vec![point.to_vec()];
    for j in 0..point.len() {
        for s in [-1.0, 1.0] {
            let mut p = point.to_vec();
            p[j] += s * h;
            out.push(p);
        }
    }
    out
}
