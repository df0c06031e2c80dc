//! Triangulations of the unit disk, the unit square and annuli.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};

/// Cells with area below this multiple of their squared longest edge are
/// rejected as degenerate. Relative, so deeply graded meshes stay valid.
pub const MIN_CELL_SHAPE: f64 = 1e-10;

/// Slack used when deciding whether a ball fits in the domain.
const FIT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Geometry {
    UnitDisk,
    /// `[0, 1]²`
    UnitSquare,
    Annulus { r_in: f64, r_out: f64 },
    /// The cells of a larger mesh inside a ball.
    Region { center: [f64; 2], radius: f64 },
}

impl Geometry {
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let r = x[0].hypot(x[1]);
        match *self {
            Geometry::UnitDisk => r <= 1.0 + FIT_SLACK,
            Geometry::UnitSquare => x.iter().all(|v| (-FIT_SLACK..=1.0 + FIT_SLACK).contains(v)),
            Geometry::Annulus { r_in, r_out } => r >= r_in - FIT_SLACK && r <= r_out + FIT_SLACK,
            Geometry::Region { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= radius + FIT_SLACK,
        }
    }

    pub fn contains_ball(&self, b: &Ball) -> bool {
        if b.dim() != 2 {
            return false;
        }
        let c = &b.center;
        let d = c[0].hypot(c[1]);
        match *self {
            Geometry::UnitDisk => d + b.radius <= 1.0 + FIT_SLACK,
            Geometry::UnitSquare => c.iter().all(|v| v - b.radius >= -FIT_SLACK && v + b.radius <= 1.0 + FIT_SLACK),
            Geometry::Annulus { r_in, r_out } => d + b.radius <= r_out + FIT_SLACK && d - b.radius >= r_in - FIT_SLACK,
            Geometry::Region { center, radius } => {
                (c[0] - center[0]).hypot(c[1] - center[1]) + b.radius <= radius + FIT_SLACK
            }
        }
    }

    /// Whether `x` lies on the geometric boundary.
    fn on_boundary(&self, x: &[f64; 2]) -> bool {
        let tol = 1e-10;
        let r = x[0].hypot(x[1]);
        match *self {
            Geometry::UnitDisk => (r - 1.0).abs() < tol,
            Geometry::UnitSquare => x.iter().any(|v| v.abs() < tol || (v - 1.0).abs() < tol),
            Geometry::Annulus { r_in, r_out } => (r - r_in).abs() < tol * r_in.max(1.0) || (r - r_out).abs() < tol,
            Geometry::Region { .. } => false,
        }
    }
}

/// Mesh parameters; `build(level)` applies `level` uniform refinements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshSpec {
    /// Rings of radius `grading^k` down to `inner_radius`, closed by a fan
    /// around the origin. Refinement doubles `sectors` and takes the square
    /// root of `grading`.
    GradedDisk {
        #[serde(default = "default_sectors")]
        sectors: usize,
        #[serde(default = "default_grading")]
        grading: f64,
        #[serde(default = "default_inner_radius")]
        inner_radius: f64,
    },
    UnitSquare {
        #[serde(default = "default_cells")]
        cells: usize,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
        #[serde(default = "default_sectors")]
        sectors: usize,
        #[serde(default = "default_cells")]
        layers: usize,
    },
}

fn default_sectors() -> usize {
    16
}
fn default_grading() -> f64 {
    0.7
}
fn default_inner_radius() -> f64 {
    1e-4
}
fn default_cells() -> usize {
    8
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::GradedDisk {
            sectors: default_sectors(),
            grading: default_grading(),
            inner_radius: default_inner_radius(),
        }
    }
}

impl MeshSpec {
    pub fn build(&self, level: usize) -> Result<Mesh> {
        let k = 1usize << level;
        let mut m = match *self {
            MeshSpec::GradedDisk {
                sectors,
                grading,
                inner_radius,
            } => Mesh::graded_disk(sectors * k, grading.powf(1.0 / k as f64), inner_radius)?,
            MeshSpec::UnitSquare { cells } => Mesh::unit_square(cells * k)?,
            MeshSpec::Annulus {
                r_in,
                r_out,
                sectors,
                layers,
            } => Mesh::annulus(r_in, r_out, sectors * k, layers * k)?,
        };
        m.refinement_level = level;
        Ok(m)
    }
}

/// A conforming triangulation of a planar domain.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub refinement_level: usize,
    pub geometry: Geometry,
}

impl Mesh {
    /// Validates cell areas and orientation and flags boundary vertices
    /// from the geometry.
    pub fn new(vertices: Vec<[f64; 2]>, mut cells: Vec<[usize; 3]>, geometry: Geometry) -> Result<Mesh> {
        for c in cells.iter_mut() {
            if c.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Geometry(format!("cell {c:?} references a missing vertex")));
            }
            let a = signed_area(&vertices, c);
            let edge2 = (0..3)
                .map(|k| {
                    let (x, y) = (vertices[c[k]], vertices[c[(k + 1) % 3]]);
                    (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
                })
                .fold(0.0, f64::max);
            if !(a.abs() > MIN_CELL_SHAPE * edge2) {
                return Err(Error::Geometry(format!("degenerate cell {c:?} with area {a:e}")));
            }
            if a < 0.0 {
                c.swap(1, 2);
            }
        }
        let boundary = vertices.iter().map(|x| geometry.on_boundary(x)).collect();
        Ok(Mesh {
            vertices,
            cells,
            boundary,
            refinement_level: 0,
            geometry,
        })
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn graded_disk(sectors: usize, grading: f64, inner_radius: f64) -> Result<Mesh> {
        if sectors < 3 {
            return Err(Error::invalid(format!("a disk mesh needs at least 3 sectors, got {sectors}")));
        }
        if !(grading > 0.0 && grading < 1.0) {
            return Err(Error::invalid(format!("grading must lie in (0, 1), got {grading}")));
        }
        if !(inner_radius > 0.0 && inner_radius < 1.0) {
            return Err(Error::invalid(format!("inner radius must lie in (0, 1), got {inner_radius}")));
        }
        let mut radii = vec![1.0];
        while *radii.last().unwrap() * grading >= inner_radius {
            radii.push(radii.last().unwrap() * grading);
        }
        let dt = 2.0 * PI / sectors as f64;
        let mut vertices = Vec::with_capacity(radii.len() * sectors + 1);
        for r in &radii {
            for j in 0..sectors {
                let t = dt * j as f64;
                vertices.push([r * t.cos(), r * t.sin()]);
            }
        }
        let center = vertices.len();
        vertices.push([0.0, 0.0]);
        let mut cells = Vec::with_capacity(2 * radii.len() * sectors);
        let at = |ring: usize, j: usize| ring * sectors + j % sectors;
        for ring in 0..radii.len() - 1 {
            for j in 0..sectors {
                let (a, b) = (at(ring, j), at(ring, j + 1));
                let (c, d) = (at(ring + 1, j), at(ring + 1, j + 1));
                cells.push([a, b, d]);
                cells.push([a, d, c]);
            }
        }
        let last = radii.len() - 1;
        for j in 0..sectors {
            cells.push([at(last, j), at(last, j + 1), center]);
        }
        Mesh::new(vertices, cells, Geometry::UnitDisk)
    }

    /// `cells × cells` squares, each cut along the same diagonal.
    pub fn unit_square(cells: usize) -> Result<Mesh> {
        if cells == 0 {
            return Err(Error::invalid("a square mesh needs at least one cell"));
        }
        let h = 1.0 / cells as f64;
        let n = cells + 1;
        let mut vertices = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                vertices.push([j as f64 * h, i as f64 * h]);
            }
        }
        let mut tri = Vec::with_capacity(2 * cells * cells);
        for i in 0..cells {
            for j in 0..cells {
                let a = i * n + j;
                tri.push([a, a + 1, a + n + 1]);
                tri.push([a, a + n + 1, a + n]);
            }
        }
        Mesh::new(vertices, tri, Geometry::UnitSquare)
    }

    /// Uniform in angle and in radius.
    pub fn annulus(r_in: f64, r_out: f64, sectors: usize, layers: usize) -> Result<Mesh> {
        if !(r_in > 0.0 && r_out > r_in) || sectors < 3 || layers == 0 {
            return Err(Error::invalid(format!(
                "bad annulus parameters r_in={r_in}, r_out={r_out}, sectors={sectors}, layers={layers}"
            )));
        }
        let dt = 2.0 * PI / sectors as f64;
        let dr = (r_out - r_in) / layers as f64;
        let mut vertices = Vec::with_capacity((layers + 1) * sectors);
        for k in 0..=layers {
            let r = r_out - dr * k as f64;
            for j in 0..sectors {
                let t = dt * j as f64;
                vertices.push([r * t.cos(), r * t.sin()]);
            }
        }
        let at = |ring: usize, j: usize| ring * sectors + j % sectors;
        let mut cells = Vec::with_capacity(2 * layers * sectors);
        for ring in 0..layers {
            for j in 0..sectors {
                let (a, b) = (at(ring, j), at(ring, j + 1));
                let (c, d) = (at(ring + 1, j), at(ring + 1, j + 1));
                cells.push([a, b, d]);
                cells.push([a, d, c]);
            }
        }
        Mesh::new(vertices, cells, Geometry::Annulus { r_in, r_out })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn area(&self, c: usize) -> f64 {
        signed_area(&self.vertices, &self.cells[c])
    }

    pub fn barycenter(&self, c: usize) -> [f64; 2] {
        let [a, b, d] = self.cells[c].map(|i| self.vertices[i]);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    /// Gradients of the three hat functions on cell `c`.
    pub fn hat_gradients(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c].map(|i| self.vertices[i]);
        let two_area = 2.0 * self.area(c);
        [
            [(b[1] - d[1]) / two_area, (d[0] - b[0]) / two_area],
            [(d[1] - a[1]) / two_area, (a[0] - d[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Longest edge of cell `c`.
    pub fn diameter(&self, c: usize) -> f64 {
        let [a, b, d] = self.cells[c].map(|i| self.vertices[i]);
        let e = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        e(a, b).max(e(b, d)).max(e(d, a))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.diameter(c)).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.area(c)).sum()
    }

    /// Indices of vertices not on the boundary, in vertex order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&i| !self.boundary[i]).collect()
    }

    /// Cells whose barycenter lies in `ball`.
    pub fn cells_in(&self, ball: &Ball) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&c| ball.contains(&self.barycenter(c)))
            .collect()
    }

    /// Cells with all vertices in the closed ball, renumbered, with boundary
    /// vertices taken from the edges that belong to a single cell. Also
    /// returns the original index of every new vertex and cell.
    pub fn submesh(&self, ball: &Ball) -> Result<(Mesh, Vec<usize>, Vec<usize>)> {
        let inside = |i: usize| ball.distance_to_center(&self.vertices[i]) <= ball.radius * (1.0 + 1e-12);
        let cell_map: Vec<usize> = (0..self.cell_count())
            .filter(|&c| self.cells[c].iter().all(|&i| inside(i)))
            .collect();
        if cell_map.is_empty() {
            return Err(Error::Geometry(format!("no cell lies inside {ball:?}")));
        }
        let mut new_index = vec![usize::MAX; self.vertex_count()];
        let mut vertex_map = Vec::new();
        let mut cells = Vec::with_capacity(cell_map.len());
        for &c in &cell_map {
            let cell = self.cells[c].map(|i| {
                if new_index[i] == usize::MAX {
                    new_index[i] = vertex_map.len();
                    vertex_map.push(i);
                }
                new_index[i]
            });
            cells.push(cell);
        }
        let mut edges = std::collections::BTreeMap::new();
        for c in &cells {
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        let mut boundary = vec![false; vertex_map.len()];
        for ((a, b), n) in edges {
            if n == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        let vertices = vertex_map.iter().map(|&i| self.vertices[i]).collect();
        let geometry = Geometry::Region {
            center: [ball.center[0], ball.center[1]],
            radius: ball.radius,
        };
        let mut m = Mesh::new(vertices, cells, geometry)?;
        m.boundary = boundary;
        m.refinement_level = self.refinement_level;
        Ok((m, vertex_map, cell_map))
    }

    /// `index,x,y,boundary` rows.
    pub fn write_vertices<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "x", "y", "boundary"])?;
        for (i, (v, b)) in self.vertices.iter().zip(&self.boundary).enumerate() {
            out.write_record([
                i.to_string(),
                format!("{:.17e}", v[0]),
                format!("{:.17e}", v[1]),
                (*b as u8).to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<mesh vertices>", e))?;
        Ok(())
    }

    /// `index,v0,v1,v2` rows.
    pub fn write_cells<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "v0", "v1", "v2"])?;
        for (i, c) in self.cells.iter().enumerate() {
            out.write_record([i.to_string(), c[0].to_string(), c[1].to_string(), c[2].to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<mesh cells>", e))?;
        Ok(())
    }

    /// Reads the pair written by [`Mesh::write_vertices`] and
    /// [`Mesh::write_cells`]; lines starting with `#` are skipped.
    pub fn read<R1: Read, R2: Read>(vertices: R1, cells: R2, geometry: Geometry) -> Result<Mesh> {
        let mut vr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(vertices);
        let mut vs = Vec::new();
        let mut flags = Vec::new();
        for rec in vr.records() {
            let rec = rec?;
            let x: f64 = parse(&rec, 1)?;
            let y: f64 = parse(&rec, 2)?;
            let b: u8 = parse(&rec, 3)?;
            vs.push([x, y]);
            flags.push(b == 1);
        }
        let mut cr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(cells);
        let mut cs = Vec::new();
        for rec in cr.records() {
            let rec = rec?;
            cs.push([parse(&rec, 1)?, parse(&rec, 2)?, parse(&rec, 3)?]);
        }
        let mut m = Mesh::new(vs, cs, geometry)?;
        m.boundary = flags;
        Ok(m)
    }
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::invalid(format!("bad mesh record {rec:?} at column {k}")))
}

fn signed_area(v: &[[f64; 2]], c: &[usize; 3]) -> f64 {
    let [a, b, d] = c.map(|i| v[i]);
    0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_converges() {
        let m = Mesh::graded_disk(64, 0.8, 1e-3).unwrap();
        // inscribed polygon area
        let polygon = 0.5 * 64.0 * (2.0 * PI / 64.0).sin();
        assert!((m.total_area() - polygon).abs() < 1e-12);
        assert!(m.boundary.iter().filter(|b| **b).count() == 64);
        assert!(!m.boundary[m.vertex_count() - 1]);
    }

    #[test]
    fn cells_are_counterclockwise() {
        for m in [Mesh::graded_disk(8, 0.5, 1e-2).unwrap(), Mesh::unit_square(3).unwrap(), Mesh::annulus(0.5, 1.0, 8, 2).unwrap()] {
            assert!((0..m.cell_count()).all(|c| m.area(c) > 0.0));
        }
    }

    #[test]
    fn hat_gradients_sum_to_zero_and_reproduce_linears() {
        let m = Mesh::graded_disk(12, 0.6, 1e-2).unwrap();
        for c in 0..m.cell_count() {
            let g = m.hat_gradients(c);
            let mut s = [0.0, 0.0];
            let mut lin = [0.0, 0.0];
            for k in 0..3 {
                let x = m.vertices[m.cells[c][k]];
                s[0] += g[k][0];
                s[1] += g[k][1];
                lin[0] += g[k][0] * (2.0 * x[0] - x[1]);
                lin[1] += g[k][1] * (2.0 * x[0] - x[1]);
            }
            assert!(s[0].abs() < 1e-6 * g[0][0].abs().max(1.0) && s[1].abs() < 1e-6 * g[0][1].abs().max(1.0));
            assert!((lin[0] - 2.0).abs() < 1e-8 && (lin[1] + 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn refinement_grows_mesh() {
        let spec = MeshSpec::default();
        let a = spec.build(0).unwrap();
        let b = spec.build(1).unwrap();
        assert!(b.vertex_count() > 3 * a.vertex_count());
        assert_eq!(b.refinement_level, 1);
        assert!(b.max_diameter() < a.max_diameter());
    }

    #[test]
    fn square_boundary() {
        let m = Mesh::unit_square(4).unwrap();
        assert_eq!(m.boundary.iter().filter(|b| **b).count(), 16);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let m = Mesh::annulus(0.25, 1.0, 6, 3).unwrap();
        let mut v = Vec::new();
        let mut c = Vec::new();
        m.write_vertices(&mut v).unwrap();
        m.write_cells(&mut c).unwrap();
        let mut with_header = b"# settings-hash: 0\n".to_vec();
        with_header.extend_from_slice(&v);
        let back = Mesh::read(&with_header[..], &c[..], m.geometry.clone()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.cells, m.cells);
        assert_eq!(back.boundary, m.boundary);
    }

    #[test]
    fn ball_fit() {
        let g = Geometry::UnitDisk;
        assert!(g.contains_ball(&Ball::new(vec![0.5, 0.0], 0.5).unwrap()));
        assert!(!g.contains_ball(&Ball::new(vec![0.5, 0.0], 0.6).unwrap()));
        assert!(Geometry::UnitSquare.contains_ball(&Ball::new(vec![0.5, 0.5], 0.25).unwrap()));
    }

    #[test]
    fn submesh_of_square() {
        let m = Mesh::unit_square(8).unwrap();
        let b = Ball::new(vec![0.5, 0.5], 0.3).unwrap();
        let (sub, vmap, cmap) = m.submesh(&b).unwrap();
        assert!(sub.cell_count() > 0 && cmap.len() == sub.cell_count());
        for (k, &i) in vmap.iter().enumerate() {
            assert_eq!(sub.vertices[k], m.vertices[i]);
        }
        // the center vertex is interior, the far corners of the patch are not
        let center = vmap.iter().position(|&i| m.vertices[i] == [0.5, 0.5]).unwrap();
        assert!(!sub.boundary[center]);
        assert!(sub.boundary.iter().any(|b| *b));
    }

    #[test]
    fn degenerate_cells_are_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(Mesh::new(v, vec![[0, 1, 2]], Geometry::UnitSquare), Err(Error::Geometry(_))));
    }
}
