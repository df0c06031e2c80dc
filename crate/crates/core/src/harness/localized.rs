//! The localized function `z`, its defect `g` and the frozen comparison `h`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::fem::problem::{Dirichlet, WeakProblem};
use crate::fem::solver::{solve, ConvergenceTrace, SolverConfig};
use crate::harness::cz::{cell_data_norm, cell_mean_over, cell_omega, field_mean, safe_ratio};
use crate::nfunctions::conjugate_exponent;
use crate::seminorms::bmo::bmo_matrix;
use crate::seminorms::family::BallFamily;
use crate::weights::field::WeightField;
use crate::weights::means::log_mean_matrix;
use crate::weights::quadrature::QuadratureSpec;
use crate::weights::spd::SpdMatrix;

/// Radial `C¹` bump: 1 on `½B₀`, 0 outside `B₀`, smoothstep in between.
pub fn cutoff(b0: &Ball, x: &[f64]) -> f64 {
    let half = 0.5 * b0.radius;
    let t = ((b0.distance_to_center(x) - half) / half).clamp(0.0, 1.0);
    1.0 - t * t * (3.0 - 2.0 * t)
}

#[derive(Clone, Debug)]
pub struct LocalizedTriple {
    pub ball0: Ball,
    /// The comparison ball `B` with `4B ⊂ 2B₀`.
    pub ball: Ball,
    pub p: f64,
    pub zeta: DiscreteField,
    /// `(u - ⟨u⟩_{2B₀}) ζ^{p'}`
    pub z: DiscreteField,
    /// `ζ^{p'}∇u - ∇z` per cell, with `ζ^{p'}` at the barycenter.
    pub g: Vec<[f64; 2]>,
    /// Frozen solution on the cells inside `B` with boundary values `z`.
    pub h: DiscreteField,
    /// Original index of every cell of `h`'s mesh.
    pub sub_cells: Vec<usize>,
    pub m_b: SpdMatrix,
    pub mean_u: f64,
    pub trace: ConvergenceTrace,
}

/// Builds `ζ`, `z`, `g` on `u`'s mesh and solves for `h` on `ball`, which
/// defaults to `½B₀`.
pub fn build_localized(
    u: &DiscreteField,
    weight: &WeightField,
    b0: &Ball,
    ball: Option<Ball>,
    p: f64,
    quad: &QuadratureSpec,
    solver: &SolverConfig,
) -> Result<LocalizedTriple> {
    let mesh = u.mesh().clone();
    let outer = b0.dilate(2.0);
    if !mesh.geometry.contains_ball(&outer) {
        return Err(Error::Geometry(format!("{outer:?} leaves the mesh domain")));
    }
    let ball = ball.unwrap_or_else(|| b0.dilate(0.5));
    if !ball.dilate(4.0).inside(&outer) {
        return Err(Error::Geometry(format!("4B for {ball:?} is not inside 2B0")));
    }
    let pc = conjugate_exponent(p);
    let mean_u = field_mean(u, &outer)?;
    let zeta = DiscreteField::interpolate(mesh.clone(), |x| Ok(cutoff(b0, x)))?;
    let z_values = u
        .values
        .iter()
        .zip(&zeta.values)
        .map(|(v, s)| (v - mean_u) * s.powf(pc))
        .collect();
    let z = DiscreteField::new(mesh.clone(), z_values)?;
    let g = (0..mesh.cell_count())
        .map(|c| {
            let s = zeta.cell_mean(c).powf(pc);
            let (gu, gz) = (u.gradient(c), z.gradient(c));
            [s * gu[0] - gz[0], s * gu[1] - gz[1]]
        })
        .collect();

    let m_b = log_mean_matrix(weight, &ball, quad)?;
    let (sub, vmap, cmap) = mesh.submesh(&ball)?;
    let sub = Arc::new(sub);
    let boundary: Vec<f64> = vmap.iter().map(|&i| z.values[i]).collect();
    let prob = WeakProblem::new(WeightField::constant(m_b.clone(), "M_B"), p)?
        .frozen(m_b.clone())?
        .with_dirichlet(Dirichlet::Nodal(boundary));
    let (h, trace) = solve(&prob, sub, solver)?;
    Ok(LocalizedTriple {
        ball0: b0.clone(),
        ball,
        p,
        zeta,
        z,
        g,
        h,
        sub_cells: cmap,
        m_b,
        mean_u,
        trace,
    })
}

impl LocalizedTriple {
    /// `z` restricted to the mesh of `h`.
    pub fn z_on_ball(&self) -> DiscreteField {
        let mesh = self.h.mesh().clone();
        let mut vals = vec![0.0; mesh.vertex_count()];
        for (k, &c) in self.sub_cells.iter().enumerate() {
            for (j, &i) in mesh.cells[k].iter().enumerate() {
                vals[i] = self.z.values[self.z.mesh().cells[c][j]];
            }
        }
        DiscreteField::new(mesh, vals).expect("sizes agree")
    }

    /// `∫_B (1/p)|M_B∇v|ᵖ` for a field on the mesh of `h`.
    pub fn frozen_energy(&self, v: &DiscreteField) -> f64 {
        let m = to_matrix2(&self.m_b);
        let mesh = v.mesh();
        (0..mesh.cell_count())
            .map(|c| {
                let g = v.gradient(c);
                (m * Vector2::new(g[0], g[1])).norm().powf(self.p) / self.p * mesh.area(c)
            })
            .sum()
    }
}

fn to_matrix2(m: &SpdMatrix) -> Matrix2<f64> {
    let a = m.as_matrix();
    Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)])
}

fn v_map(p: f64, xi: Vector2<f64>) -> Vector2<f64> {
    let n = xi.norm();
    if n == 0.0 {
        xi
    } else {
        xi * n.powf(0.5 * (p - 2.0))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    /// `⨍_B |V(M_B∇h) - V(M_B∇z)|²`
    pub lhs: f64,
    pub bmo_log_m: f64,
    pub delta: f64,
    pub s: f64,
    /// `(bmo² + δ)(⨍_B (|∇z|ᵖωᵖ)^s)^{1/s}`
    pub oscillation_term: f64,
    /// `δ^{1-p}(⨍_{4B} (|u - ⟨u⟩_{2B₀}|ᵖ/Rᵖ ωᵖ)^s)^{1/s}`
    pub solution_term: f64,
    /// `δ^{1-p}(⨍_{4B} (ζᵖ|G|ᵖωᵖ)^s)^{1/s}`
    pub data_term: f64,
    pub ratio: Option<f64>,
}

/// Both sides of the comparison estimate for `triple`, built from `u`.
pub fn comparison_check(
    triple: &LocalizedTriple,
    u: &DiscreteField,
    prob: &WeakProblem,
    delta: f64,
    s: f64,
    quad: &QuadratureSpec,
) -> Result<ComparisonReport> {
    if !(delta > 0.0 && s >= 1.0) {
        return Err(Error::invalid(format!("need delta > 0 and s >= 1, got {delta}, {s}")));
    }
    let p = triple.p;
    let mesh: &Mesh = u.mesh();
    let m = to_matrix2(&triple.m_b);
    let sub = triple.h.mesh();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..sub.cell_count() {
        let gh = triple.h.gradient(k);
        let gz = triple.z.gradient(triple.sub_cells[k]);
        let d = v_map(p, m * Vector2::new(gh[0], gh[1])) - v_map(p, m * Vector2::new(gz[0], gz[1]));
        num += d.norm_squared() * sub.area(k);
        den += sub.area(k);
    }
    let lhs = num / den;

    let omega = cell_omega(mesh, prob)?;
    let gnorm = cell_data_norm(mesh, prob)?;
    let big = triple.ball.dilate(4.0);
    let r0 = triple.ball0.radius;
    let cells = mesh.cell_count();
    let zgrad: Vec<f64> = (0..cells)
        .map(|c| {
            let g = triple.z.gradient(c);
            (g[0].hypot(g[1]) * omega[c]).powf(p * s)
        })
        .collect();
    let osc: Vec<f64> = (0..cells)
        .map(|c| ((u.cell_mean(c) - triple.mean_u).abs() / r0 * omega[c]).powf(p * s))
        .collect();
    let data: Vec<f64> = (0..cells)
        .map(|c| (triple.zeta.cell_mean(c) * gnorm[c] * omega[c]).powf(p * s))
        .collect();
    let zterm = cell_mean_over(mesh, &zgrad, &triple.ball)?.powf(1.0 / s);
    let uterm = cell_mean_over(mesh, &osc, &big)?.powf(1.0 / s);
    let gterm = cell_mean_over(mesh, &data, &big)?.powf(1.0 / s);

    let fam = BallFamily::dyadic_grid(triple.ball.clone(), 3, 2.0)?;
    let bmo = bmo_matrix(&prob.weight.log_field(), &fam, quad)?.value;
    let oscillation_term = (bmo * bmo + delta) * zterm;
    let solution_term = delta.powf(1.0 - p) * uterm;
    let data_term = delta.powf(1.0 - p) * gterm;
    Ok(ComparisonReport {
        lhs,
        bmo_log_m: bmo,
        delta,
        s,
        oscillation_term,
        solution_term,
        data_term,
        ratio: safe_ratio(lhs, oscillation_term + solution_term + data_term),
    })
}
