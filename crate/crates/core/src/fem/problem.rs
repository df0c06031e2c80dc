//! Weighted p-Laplace problems and their per-cell discretization.

use std::fmt;
use std::sync::Arc;

use log::warn;
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::weights::field::{ScalarField, WeightField};
use crate::weights::spd::SpdMatrix;

type VectorFn = Arc<dyn Fn(&[f64]) -> Result<[f64; 2]> + Send + Sync>;

/// Right-hand side field `G`.
#[derive(Clone, Default)]
pub enum DataField {
    #[default]
    Zero,
    Analytic(VectorFn),
    /// One vector per mesh cell.
    Cells(Vec<[f64; 2]>),
}

impl DataField {
    pub fn analytic(f: impl Fn(&[f64]) -> Result<[f64; 2]> + Send + Sync + 'static) -> Self {
        DataField::Analytic(Arc::new(f))
    }

    /// `G` on cell `c` with barycenter `x`.
    pub fn at(&self, c: usize, x: &[f64]) -> Result<[f64; 2]> {
        match self {
            DataField::Zero => Ok([0.0, 0.0]),
            DataField::Analytic(f) => f(x),
            DataField::Cells(v) => v
                .get(c)
                .copied()
                .ok_or_else(|| Error::invalid(format!("data field has no value for cell {c}"))),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DataField::Zero)
    }
}

impl fmt::Debug for DataField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataField::Zero => write!(f, "Zero"),
            DataField::Analytic(_) => write!(f, "Analytic(..)"),
            DataField::Cells(v) => write!(f, "Cells({} values)", v.len()),
        }
    }
}

/// Boundary values.
#[derive(Clone, Debug, Default)]
pub enum Dirichlet {
    #[default]
    Zero,
    Function(ScalarField),
    /// One value per mesh vertex; only boundary entries are read.
    Nodal(Vec<f64>),
}

impl Dirichlet {
    pub fn value(&self, mesh: &Mesh, i: usize) -> Result<f64> {
        match self {
            Dirichlet::Zero => Ok(0.0),
            Dirichlet::Function(f) => f.eval(&mesh.vertices[i]),
            Dirichlet::Nodal(v) => v
                .get(i)
                .copied()
                .ok_or_else(|| Error::invalid(format!("no boundary value for vertex {i}"))),
        }
    }
}

/// `-div(|M∇u|^{p-2} M²∇u) = -div(|MG|^{p-2} M²G)` with Dirichlet data.
#[derive(Clone, Debug)]
pub struct WeakProblem {
    pub weight: WeightField,
    pub p: f64,
    pub data: DataField,
    pub dirichlet: Dirichlet,
    /// When set, the weight is replaced by this constant matrix.
    pub frozen: Option<SpdMatrix>,
}

impl WeakProblem {
    pub fn new(weight: WeightField, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must lie in (1, inf), got {p}")));
        }
        if weight.dim() != 2 {
            return Err(Error::invalid("the solver supports planar weights only"));
        }
        if weight.condition_bound().is_some_and(|c| !c.is_finite()) {
            return Err(Error::invalid("weight condition bound must be finite"));
        }
        Ok(WeakProblem {
            weight,
            p,
            data: DataField::Zero,
            dirichlet: Dirichlet::Zero,
            frozen: None,
        })
    }

    pub fn with_data(mut self, data: DataField) -> Self {
        self.data = data;
        self
    }

    pub fn with_dirichlet(mut self, d: Dirichlet) -> Self {
        self.dirichlet = d;
        self
    }

    /// The frozen-coefficient problem with constant weight `m_b`.
    pub fn frozen(mut self, m_b: SpdMatrix) -> Result<Self> {
        if m_b.dim() != 2 {
            return Err(Error::invalid("frozen matrix must be 2x2"));
        }
        self.frozen = Some(m_b);
        Ok(self)
    }

    /// `𝒜(x, ξ) = |Mξ|^{p-2} M²ξ` for a given `M`.
    pub fn operator(m: &Matrix2<f64>, p: f64, xi: [f64; 2]) -> [f64; 2] {
        let v = Vector2::new(xi[0], xi[1]);
        let mv = m * v;
        let n = mv.norm();
        if n == 0.0 {
            return [0.0, 0.0];
        }
        let out = m * mv * n.powf(p - 2.0);
        [out[0], out[1]]
    }

    /// Per-cell weights and data on `mesh`.
    pub fn discretize(&self, mesh: &Mesh) -> Result<Discretization> {
        let frozen = self.frozen.as_ref().map(to_matrix2);
        let cells = (0..mesh.cell_count())
            .into_par_iter()
            .map(|c| {
                let x = mesh.barycenter(c);
                let m = match &frozen {
                    Some(m) => *m,
                    None => to_matrix2(&self.eval_weight(mesh, c, x)?),
                };
                let g = self.data.at(c, &x)?;
                Ok(CellData {
                    area: mesh.area(c),
                    grads: mesh.hat_gradients(c),
                    m,
                    a: m * m,
                    a_g: WeakProblem::operator(&m, self.p, g),
                    g,
                })
            })
            .collect::<Result<Vec<CellData>>>()?;
        Ok(Discretization { p: self.p, cells })
    }

    /// Weight at a barycenter, shifted off a singular point if needed.
    fn eval_weight(&self, mesh: &Mesh, c: usize, x: [f64; 2]) -> Result<SpdMatrix> {
        match self.weight.eval(&x) {
            Err(Error::SingularPoint { .. }) => {
                let h = mesh.diameter(c);
                let y = [x[0] + 1e-12 * h, x[1]];
                warn!("weight singular at barycenter of cell {c}; evaluating at {y:?}");
                self.weight.eval(&y)
            }
            other => other,
        }
    }
}

fn to_matrix2(m: &SpdMatrix) -> Matrix2<f64> {
    let a = m.as_matrix();
    Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)])
}

/// Cell-constant quantities of a discretized problem.
#[derive(Clone, Debug)]
pub struct CellData {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
    /// `M` at the barycenter.
    pub m: Matrix2<f64>,
    /// `M²`
    pub a: Matrix2<f64>,
    /// `𝒜(x, G)`
    pub a_g: [f64; 2],
    pub g: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub p: f64,
    pub cells: Vec<CellData>,
}

impl Discretization {
    /// Regularized energy `Σ |T| ((1/p)(|M∇u|² + η²)^{p/2} - 𝒜(x,G)·∇u)`.
    pub fn energy(&self, u: &DiscreteField, eta: f64) -> f64 {
        let p = self.p;
        let terms: Vec<f64> = self
            .cells
            .par_iter()
            .enumerate()
            .map(|(c, d)| {
                let g = u.gradient(c);
                let xi = d.m * Vector2::new(g[0], g[1]);
                let s = xi.norm_squared() + eta * eta;
                d.area * (s.powf(0.5 * p) / p - (d.a_g[0] * g[0] + d.a_g[1] * g[1]))
            })
            .collect();
        crate::weights::quadrature::compensated_sum(terms.into_iter())
    }

    /// Energy density gradient `(|M∇u|² + η²)^{(p-2)/2} M²∇u - 𝒜(x,G)` on cell `c`.
    pub fn flux(&self, c: usize, g: [f64; 2], eta: f64) -> [f64; 2] {
        let d = &self.cells[c];
        let gv = Vector2::new(g[0], g[1]);
        let xi = d.m * gv;
        let s = xi.norm_squared() + eta * eta;
        let f = if s == 0.0 { Vector2::zeros() } else { d.a * gv * s.powf(0.5 * (self.p - 2.0)) };
        [f[0] - d.a_g[0], f[1] - d.a_g[1]]
    }

    /// Hessian of the energy density on cell `c`.
    pub fn tangent(&self, c: usize, g: [f64; 2], eta: f64) -> Matrix2<f64> {
        let d = &self.cells[c];
        let p = self.p;
        let gv = Vector2::new(g[0], g[1]);
        let xi = d.m * gv;
        let s = xi.norm_squared() + eta * eta;
        if s == 0.0 {
            // degenerate unless p = 2; the solver regularizes with η > 0 otherwise
            return if p == 2.0 { d.a } else { Matrix2::zeros() };
        }
        let ag = d.a * gv;
        d.a * s.powf(0.5 * (p - 2.0)) + ag * ag.transpose() * ((p - 2.0) * s.powf(0.5 * (p - 4.0)))
    }
}
