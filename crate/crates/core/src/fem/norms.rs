//! Cell-based integral quantities of discrete fields.

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::fem::field::DiscreteField;
use crate::fem::mesh::Mesh;
use crate::weights::field::{Field, ScalarWeightField};

/// Interior points `(2/3, 1/6, 1/6)` and permutations; exact for quadratics.
pub const CELL_RULE: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub fn cell_point(mesh: &Mesh, c: usize, l: [f64; 3]) -> [f64; 2] {
    let [a, b, d] = mesh.cells[c].map(|i| mesh.vertices[i]);
    [
        l[0] * a[0] + l[1] * b[0] + l[2] * d[0],
        l[0] * a[1] + l[1] * b[1] + l[2] * d[1],
    ]
}

/// Evaluates `f` at `x`, nudging off a singular point by `1e-12·h`.
pub fn eval_near<T: 'static>(f: &Field<T>, x: [f64; 2], h: f64) -> Result<T> {
    match f.eval(&x) {
        Err(Error::SingularPoint { .. }) => f.eval(&[x[0] + 1e-12 * h, x[1]]),
        other => other,
    }
}

/// `(Σ_{T ⊂ region} v_T^ρ |T| / Σ |T|)^{1/ρ}` over cells whose barycenter
/// lies in `region`.
pub fn cell_lp_mean(mesh: &Mesh, values: &[f64], rho: f64, region: &Ball) -> Result<f64> {
    let cells = mesh.cells_in(region);
    if cells.is_empty() {
        return Err(Error::Geometry(format!("no cell barycenter inside {region:?}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for c in cells {
        let a = mesh.area(c);
        num += values[c].abs().powf(rho) * a;
        den += a;
    }
    Ok((num / den).powf(1.0 / rho))
}

/// `ω` at every barycenter.
pub fn weight_at_barycenters(mesh: &Mesh, w: &ScalarWeightField) -> Result<Vec<f64>> {
    (0..mesh.cell_count())
        .map(|c| eval_near(w.as_field(), mesh.barycenter(c), mesh.diameter(c)))
        .collect()
}

/// `(⨍_{region} (|∇u| ω)^ρ)^{1/ρ}` with barycentric weights.
pub fn weighted_lp_norm(u: &DiscreteField, w: &ScalarWeightField, rho: f64, region: &Ball) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(Error::invalid(format!("rho must be at least 1, got {rho}")));
    }
    let mesh = u.mesh();
    let cells = mesh.cells_in(region);
    let mut vals = vec![0.0; mesh.cell_count()];
    for c in cells {
        let g = u.gradient(c);
        let om = eval_near(w.as_field(), mesh.barycenter(c), mesh.diameter(c))?;
        vals[c] = g[0].hypot(g[1]) * om;
    }
    cell_lp_mean(mesh, &vals, rho, region)
}

/// `(⨍_Ω (|∇(u_h - u)| ω)²)^{1/2}` with the three-point interior rule per cell.
pub fn weighted_h1_error(
    u: &DiscreteField,
    grad_exact: impl Fn(&[f64]) -> Result<Vec<f64>>,
    w: &ScalarWeightField,
) -> Result<f64> {
    let mesh = u.mesh();
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..mesh.cell_count() {
        let gh = u.gradient(c);
        let a = mesh.area(c);
        for l in CELL_RULE {
            let x = cell_point(mesh, c, l);
            let g = grad_exact(&x)?;
            let om = w.eval(&x)?;
            let e = (gh[0] - g[0]).hypot(gh[1] - g[1]) * om;
            num += e * e * a / 3.0;
        }
        den += a;
    }
    Ok((num / den).sqrt())
}
