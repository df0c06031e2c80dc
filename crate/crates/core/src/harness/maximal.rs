//! Brute-force maximal and sharp maximal functions over a ball family.

use rayon::prelude::*;
use serde::Serialize;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::seminorms::family::BallFamily;

/// Point samples `f(x_k)` carrying area weights.
#[derive(Clone, Debug)]
pub struct Samples {
    pub points: Vec<[f64; 2]>,
    pub areas: Vec<f64>,
    pub values: Vec<f64>,
}

impl Samples {
    /// One sample per cell at the barycenter, from per-cell values.
    pub fn from_cells(u: &DiscreteField, values: Vec<f64>) -> Result<Self> {
        let mesh = u.mesh();
        if values.len() != mesh.cell_count() {
            return Err(Error::invalid("one value per cell is required"));
        }
        Ok(Samples {
            points: (0..mesh.cell_count()).map(|c| mesh.barycenter(c)).collect(),
            areas: (0..mesh.cell_count()).map(|c| mesh.area(c)).collect(),
            values,
        })
    }

    /// Cell midpoints of a uniform `n × n` grid over the square around `domain`,
    /// kept when inside `domain`.
    pub fn grid(domain: &Ball, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let h = 2.0 * domain.radius / n as f64;
        let mut s = Samples {
            points: Vec::new(),
            areas: Vec::new(),
            values: Vec::new(),
        };
        for i in 0..n {
            for j in 0..n {
                let x = [
                    domain.center[0] - domain.radius + (i as f64 + 0.5) * h,
                    domain.center[1] - domain.radius + (j as f64 + 0.5) * h,
                ];
                if domain.contains(&x) {
                    s.values.push(f(&x));
                    s.points.push(x);
                    s.areas.push(h * h);
                }
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(Σ |f|^q a)^{1/q}`
    pub fn norm(&self, values: &[f64], q: f64) -> f64 {
        let s: f64 = values.iter().zip(&self.areas).map(|(v, a)| v.abs().powf(q) * a).sum();
        s.powf(1.0 / q)
    }
}

/// Sample indices sorted by abscissa, for strip queries.
struct Strips {
    order: Vec<usize>,
    xs: Vec<f64>,
}

impl Strips {
    fn new(points: &[[f64; 2]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
        let xs = order.iter().map(|&i| points[i][0]).collect();
        Strips { order, xs }
    }

    fn query(&self, points: &[[f64; 2]], b: &Ball) -> Vec<usize> {
        let lo = self.xs.partition_point(|x| *x < b.center[0] - b.radius);
        let hi = self.xs.partition_point(|x| *x <= b.center[0] + b.radius);
        let mut out: Vec<usize> = self.order[lo..hi]
            .iter()
            .copied()
            .filter(|&i| b.contains(&points[i]))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Per-sample supremum of `avg(ball, members)` over the balls containing it.
fn sup_over_family(f: &Samples, fam: &BallFamily, avg: impl Fn(&[usize]) -> f64 + Sync) -> Vec<f64> {
    let strips = Strips::new(&f.points);
    let per_ball: Vec<(Vec<usize>, f64)> = fam
        .balls()
        .par_iter()
        .map(|b| {
            let members = strips.query(&f.points, b);
            let v = if members.is_empty() { f64::NEG_INFINITY } else { avg(&members) };
            (members, v)
        })
        .collect();
    let mut out = vec![0.0f64; f.len()];
    for (members, v) in per_ball {
        for i in members {
            out[i] = out[i].max(v);
        }
    }
    out
}

/// `sup_{B ∋ x} (⨍_B |f|^ρ)^{1/ρ}` at every sample.
pub fn maximal(f: &Samples, rho: f64, fam: &BallFamily) -> Vec<f64> {
    sup_over_family(f, fam, |m| {
        let (mut num, mut den) = (0.0, 0.0);
        for &i in m {
            num += f.values[i].abs().powf(rho) * f.areas[i];
            den += f.areas[i];
        }
        (num / den).powf(1.0 / rho)
    })
}

/// `sup_{B ∋ x} (⨍_B |f - ⟨f⟩_B|^ρ)^{1/ρ}` at every sample.
pub fn sharp_maximal(f: &Samples, rho: f64, fam: &BallFamily) -> Vec<f64> {
    sup_over_family(f, fam, |m| {
        let den: f64 = m.iter().map(|&i| f.areas[i]).sum();
        let mean = m.iter().map(|&i| f.values[i] * f.areas[i]).sum::<f64>() / den;
        let num: f64 = m.iter().map(|&i| (f.values[i] - mean).abs().powf(rho) * f.areas[i]).sum();
        (num / den).powf(1.0 / rho)
    })
}

/// Balls of radius `r 2^{-k}`, `k < levels`, with centers on a `9 × 9`
/// lattice of spacing `r 2^{-k-1}` around `center`. Resolves a point
/// singularity at every scale.
pub fn zoom_balls(center: [f64; 2], r: f64, levels: usize) -> Vec<Ball> {
    let mut out = Vec::with_capacity(81 * levels);
    for k in 0..levels {
        let s = r * 0.5f64.powi(k as i32);
        let h = 0.5 * s;
        for i in -4..=4 {
            for j in -4..=4 {
                out.push(Ball {
                    center: vec![center[0] + i as f64 * h, center[1] + j as f64 * h],
                    radius: s,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FeffermanSteinRow {
    pub q: f64,
    pub norm_f: f64,
    pub norm_sharp: f64,
    /// `‖f‖_q / (q ‖M♯₁f‖_q)`
    pub constant: f64,
}

/// The linear-in-`q` constant for each `q`.
pub fn fefferman_stein(f: &Samples, fam: &BallFamily, qs: &[f64]) -> Vec<FeffermanSteinRow> {
    let sharp = sharp_maximal(f, 1.0, fam);
    qs.iter()
        .map(|&q| {
            let norm_f = f.norm(&f.values, q);
            let norm_sharp = f.norm(&sharp, q);
            FeffermanSteinRow {
                q,
                norm_f,
                norm_sharp,
                constant: norm_f / (q * norm_sharp),
            }
        })
        .collect()
}
