use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;

/// Nodal values of a continuous piecewise-linear function.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "{} nodal values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        Ok(DiscreteField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.vertex_count();
        DiscreteField { mesh, values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Self> {
        let values = mesh.vertices.iter().map(|x| f(x)).collect::<Result<Vec<f64>>>()?;
        Ok(DiscreteField { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Differences against the first vertex keep constants exact.
    pub fn gradient(&self, c: usize) -> [f64; 2] {
        let g = self.mesh.hat_gradients(c);
        let cell = self.mesh.cells[c];
        let v0 = self.values[cell[0]];
        let mut out = [0.0; 2];
        for k in 1..3 {
            let d = self.values[cell[k]] - v0;
            out[0] += d * g[k][0];
            out[1] += d * g[k][1];
        }
        out
    }

    pub fn gradients(&self) -> Vec<[f64; 2]> {
        (0..self.mesh.cell_count()).map(|c| self.gradient(c)).collect()
    }

    /// Value at barycentric coordinates `l` of cell `c`.
    pub fn value_in(&self, c: usize, l: [f64; 3]) -> f64 {
        let [a, b, d] = self.mesh.cells[c];
        l[0] * self.values[a] + l[1] * self.values[b] + l[2] * self.values[d]
    }

    pub fn cell_mean(&self, c: usize) -> f64 {
        self.value_in(c, [1.0 / 3.0; 3])
    }

    pub fn max_abs_diff(&self, other: &DiscreteField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `index,x,y,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "x", "y", "value"])?;
        for (i, (x, v)) in self.mesh.vertices.iter().zip(&self.values).enumerate() {
            out.write_record([
                i.to_string(),
                format!("{:.12e}", x[0]),
                format!("{:.12e}", x[1]),
                format!("{:.12e}", v),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<solution>", e))?;
        Ok(())
    }
}
