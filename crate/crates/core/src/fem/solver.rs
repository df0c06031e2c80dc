//! Energy minimization by damped Newton with regularization continuation.
//!
//! The residual is reported in the discrete dual norm
//! `|r|_* = (rᵀ K⁻¹ r)^{1/2}`, where `K` is the unweighted Dirichlet
//! Laplacian on the interior vertices. Unlike the plain Euclidean norm it
//! neither vanishes nor blows up under refinement for a fixed continuous
//! residual.

use std::io::Write;
use std::sync::Arc;

use log::debug;
use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::fem::problem::{Discretization, WeakProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearch {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: LineSearch,
    /// Final `η` in `(|M∇u|² + η²)^{(p-2)/2}`.
    pub regularization_eps: f64,
    /// `η` stages run before the final one; entries below
    /// `regularization_eps` are skipped.
    pub continuation: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iterations: 200,
            damping: LineSearch::default(),
            regularization_eps: 1e-8,
            continuation: (1..8).map(|k| 10f64.powi(-k)).collect(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.regularization_eps >= 0.0) {
            return Err(Error::invalid("regularization_eps must be nonnegative"));
        }
        let ls = &self.damping;
        if !(ls.armijo > 0.0 && ls.armijo < 1.0 && ls.backtrack > 0.0 && ls.backtrack < 1.0) {
            return Err(Error::invalid("line-search parameters must lie in (0, 1)"));
        }
        Ok(())
    }

    fn stages(&self, p: f64) -> Vec<f64> {
        if p == 2.0 {
            return vec![0.0];
        }
        let mut s: Vec<f64> = self
            .continuation
            .iter()
            .copied()
            .filter(|e| *e > self.regularization_eps)
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.push(self.regularization_eps);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    /// Accepted step length of the step that produced this iterate.
    pub step_length: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
    /// Residual at `η = 0` of the returned iterate.
    pub final_residual: f64,
}

impl ConvergenceTrace {
    /// Number of accepted Newton steps.
    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iteration)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w).map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }
}

/// Vertex-to-unknown numbering.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// Unknown index of each vertex, `None` on the boundary.
    pub index: Vec<Option<usize>>,
    pub free: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut index = vec![None; mesh.vertex_count()];
        let free = mesh.interior_vertices();
        for (k, &i) in free.iter().enumerate() {
            index[i] = Some(k);
        }
        DofMap { index, free }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }
}

/// Factored Laplacian for the dual residual norm.
pub struct ResidualNorm {
    dofs: DofMap,
    chol: Option<CscCholesky<f64>>,
}

impl ResidualNorm {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let dofs = DofMap::new(mesh);
        if dofs.is_empty() {
            return Ok(ResidualNorm { dofs, chol: None });
        }
        let mut coo = CooMatrix::new(dofs.len(), dofs.len());
        for c in 0..mesh.cell_count() {
            let g = mesh.hat_gradients(c);
            let area = mesh.area(c);
            for (a, &i) in mesh.cells[c].iter().enumerate() {
                let Some(ii) = dofs.index[i] else { continue };
                for (b, &j) in mesh.cells[c].iter().enumerate() {
                    if let Some(jj) = dofs.index[j] {
                        coo.push(ii, jj, area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                    }
                }
            }
        }
        let chol = CscCholesky::factor(&CscMatrix::from(&coo))
            .map_err(|e| Error::Internal(format!("laplacian factorization failed: {e:?}")))?;
        Ok(ResidualNorm { dofs, chol: Some(chol) })
    }

    /// `(rᵀ K⁻¹ r)^{1/2}` of a residual over interior unknowns.
    pub fn norm(&self, r: &[f64]) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let b = DMatrix::from_column_slice(r.len(), 1, r);
        let x = chol.solve(&b);
        x.iter().zip(r).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }
}

#[derive(Clone, Debug)]
pub struct Residual {
    pub norm: f64,
    /// `r_i` for every vertex, zero on the boundary.
    pub per_vertex: Vec<f64>,
}

/// Energy `Σ |T| ((1/p)|M∇u|^p - |MG|^{p-2} MG·M∇u)` with barycentric weights.
pub fn energy(prob: &WeakProblem, u: &DiscreteField) -> Result<f64> {
    Ok(prob.discretize(u.mesh())?.energy(u, 0.0))
}

/// `r_i = Σ_T [𝒜(x,∇u) - 𝒜(x,G)]·∇λ_i |T|` over interior vertices.
pub fn weak_residual(prob: &WeakProblem, u: &DiscreteField) -> Result<Residual> {
    let mesh = u.mesh();
    let disc = prob.discretize(mesh)?;
    let rn = ResidualNorm::new(mesh)?;
    let r = gradient(&disc, mesh, u, 0.0, rn.dofs());
    Ok(Residual {
        norm: rn.norm(&r),
        per_vertex: scatter(rn.dofs(), &r, mesh.vertex_count()),
    })
}

fn scatter(dofs: &DofMap, r: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (k, &i) in dofs.free.iter().enumerate() {
        out[i] = r[k];
    }
    out
}

/// Energy gradient over interior unknowns, reduced in cell order.
fn gradient(disc: &Discretization, mesh: &Mesh, u: &DiscreteField, eta: f64, dofs: &DofMap) -> Vec<f64> {
    let local: Vec<[f64; 3]> = (0..mesh.cell_count())
        .into_par_iter()
        .map(|c| {
            let f = disc.flux(c, u.gradient(c), eta);
            let d = &disc.cells[c];
            d.grads.map(|g| d.area * (f[0] * g[0] + f[1] * g[1]))
        })
        .collect();
    let mut r = vec![0.0; dofs.len()];
    for (c, l) in local.iter().enumerate() {
        for (a, &i) in mesh.cells[c].iter().enumerate() {
            if let Some(k) = dofs.index[i] {
                r[k] += l[a];
            }
        }
    }
    r
}

fn hessian(disc: &Discretization, mesh: &Mesh, u: &DiscreteField, eta: f64, dofs: &DofMap) -> CscMatrix<f64> {
    let local: Vec<[[f64; 3]; 3]> = (0..mesh.cell_count())
        .into_par_iter()
        .map(|c| {
            let t = disc.tangent(c, u.gradient(c), eta);
            let d = &disc.cells[c];
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                let ta = t * nalgebra::Vector2::new(d.grads[a][0], d.grads[a][1]);
                for b in 0..3 {
                    k[a][b] = d.area * (ta[0] * d.grads[b][0] + ta[1] * d.grads[b][1]);
                }
            }
            k
        })
        .collect();
    let mut coo = CooMatrix::new(dofs.len(), dofs.len());
    for (c, k) in local.iter().enumerate() {
        let cell = mesh.cells[c];
        for a in 0..3 {
            let Some(i) = dofs.index[cell[a]] else { continue };
            for b in 0..3 {
                if let Some(j) = dofs.index[cell[b]] {
                    coo.push(i, j, k[a][b]);
                }
            }
        }
    }
    CscMatrix::from(&coo)
}

fn newton_direction(h: &CscMatrix<f64>, r: &[f64]) -> Result<Vec<f64>> {
    let chol = CscCholesky::factor(h).map_err(|e| Error::Internal(format!("tangent matrix is not positive definite: {e:?}")))?;
    let b = DMatrix::from_column_slice(r.len(), 1, r);
    Ok(chol.solve(&b).iter().map(|v| -v).collect())
}

fn with_step(u: &DiscreteField, dofs: &DofMap, d: &[f64], t: f64) -> DiscreteField {
    let mut v = u.clone();
    for (k, &i) in dofs.free.iter().enumerate() {
        v.values[i] += t * d[k];
    }
    v
}

/// Minimizes the energy of `prob` on `mesh` subject to its Dirichlet data.
///
/// `p = 2` is a single linear solve. Otherwise Newton runs on the
/// regularized energy through the `η` stages of `cfg`, starting from the
/// `p = 2` solution; the returned iterate has an unregularized residual of
/// at most `cfg.tolerance`.
pub fn solve(prob: &WeakProblem, mesh: Arc<Mesh>, cfg: &SolverConfig) -> Result<(DiscreteField, ConvergenceTrace)> {
    cfg.validate()?;
    let disc = prob.discretize(&mesh)?;
    let rn = ResidualNorm::new(&mesh)?;
    let dofs = rn.dofs().clone();
    let mut u = DiscreteField::zeros(mesh.clone());
    for i in 0..mesh.vertex_count() {
        if dofs.index[i].is_none() {
            u.values[i] = prob.dirichlet.value(&mesh, i)?;
        }
    }
    let mut trace = ConvergenceTrace::default();
    if dofs.is_empty() {
        trace.converged = true;
        return Ok((u, trace));
    }
    if prob.p != 2.0 {
        let mut lin = disc.clone();
        lin.p = 2.0;
        for d in lin.cells.iter_mut() {
            let ag = d.a * nalgebra::Vector2::new(d.g[0], d.g[1]);
            d.a_g = [ag[0], ag[1]];
        }
        let r = gradient(&lin, &mesh, &u, 0.0, &dofs);
        let d = newton_direction(&hessian(&lin, &mesh, &u, 0.0, &dofs), &r)?;
        u = with_step(&u, &dofs, &d, 1.0);
    }

    let ls = &cfg.damping;
    let stages = cfg.stages(prob.p);
    let mut iteration = 0usize;
    let mut step = 0.0;
    for (s, &eta) in stages.iter().enumerate() {
        let last = s + 1 == stages.len();
        let stage_tol = if last { cfg.tolerance } else { cfg.tolerance.max(eta) };
        loop {
            let r = gradient(&disc, &mesh, &u, eta, &dofs);
            let res = rn.norm(&r);
            let e = disc.energy(&u, eta);
            trace.entries.push(TraceEntry {
                iteration,
                energy: e,
                residual: res,
                step_length: step,
                eta,
            });
            debug!("newton it={iteration} eta={eta:e} energy={e:.12e} residual={res:e}");
            if res <= stage_tol {
                break;
            }
            if iteration >= cfg.max_iterations {
                return Err(Error::NonConvergence {
                    reason: format!("iteration limit {} reached with residual {res:e}", cfg.max_iterations),
                    trace: Box::new(trace),
                });
            }
            let d = newton_direction(&hessian(&disc, &mesh, &u, eta, &dofs), &r)?;
            let slope: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=ls.max_backtracks {
                let v = with_step(&u, &dofs, &d, t);
                let ev = disc.energy(&v, eta);
                if ev <= e + ls.armijo * t * slope && ev < e {
                    accepted = Some(v);
                    break;
                }
                t *= ls.backtrack;
            }
            match accepted {
                Some(v) => {
                    u = v;
                    step = t;
                    iteration += 1;
                }
                // no representable decrease left: the iterate is as good as
                // the energy can tell; let the final residual decide
                None if slope.abs() <= 1e-14 * e.abs().max(1e-300) => break,
                None => {
                    return Err(Error::NonConvergence {
                        reason: format!("line search failed after {} backtracks", ls.max_backtracks),
                        trace: Box::new(trace),
                    })
                }
            }
        }
    }
    let final_r = gradient(&disc, &mesh, &u, 0.0, &dofs);
    trace.final_residual = rn.norm(&final_r);
    if trace.final_residual > cfg.tolerance {
        return Err(Error::NonConvergence {
            reason: format!(
                "unregularized residual {:e} exceeds tolerance {:e}",
                trace.final_residual, cfg.tolerance
            ),
            trace: Box::new(trace),
        });
    }
    trace.converged = true;
    Ok((u, trace))
}
