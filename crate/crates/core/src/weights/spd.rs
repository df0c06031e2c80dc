//! Symmetric positive-definite matrices and their spectral functions.
//!
//! Every matrix function here (exp, log, powers, inverse) goes through the
//! symmetric eigendecomposition `M = V diag(λ) Vᵀ`. Series expansions are
//! avoided because the weights of interest have eigenvalues spread over
//! many orders of magnitude.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative symmetry tolerance: `|m_ij - m_ji| <= tol * (1 + |m_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest relative asymmetry of a square matrix.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (m[(i, j)] - m[(j, i)]).abs() / (1.0 + m[(i, j)].abs());
            worst = worst.max(d);
        }
    }
    worst
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && asymmetry(m) <= SYMMETRY_TOL
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V diag(f(λ)) Vᵀ`, symmetrized against rounding.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let fk = f(self.values[k]);
            let v = self.vectors.column(k);
            for i in 0..n {
                let vi = v[i] * fk;
                for j in 0..n {
                    out[(i, j)] += vi * v[j];
                }
            }
        }
        symmetrize(&out)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Symmetric eigendecomposition. Uses a closed form for 2×2 matrices.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if n == 1 {
        return SymEigen {
            values: DVector::from_element(1, m[(0, 0)]),
            vectors: DMatrix::identity(1, 1),
        };
    }
    if n == 2 {
        let a = m[(0, 0)];
        let d = m[(1, 1)];
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        let mean = 0.5 * (a + d);
        let half_diff = 0.5 * (a - d);
        let r = half_diff.hypot(b);
        let (lo, hi) = (mean - r, mean + r);
        let phi = 0.5 * b.atan2(half_diff);
        let (s, c) = phi.sin_cos();
        // column 0 -> lo, column 1 -> hi
        let vectors = DMatrix::from_row_slice(2, 2, &[-s, c, c, s]);
        return SymEigen {
            values: DVector::from_vec(vec![lo, hi]),
            vectors,
        };
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen { values, vectors }
}

/// Spectral norm of a symmetric matrix: the largest |λ|.
pub fn sym_norm(h: &DMatrix<f64>) -> f64 {
    let e = sym_eigen(h);
    e.min().abs().max(e.max().abs())
}

/// A symmetric positive-definite `n × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates positive definiteness. Input is symmetrized as `½(M + Mᵀ)`;
    /// asymmetry above [`SYMMETRY_TOL`] is logged, not rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let asym = asymmetry(&m);
        if asym > SYMMETRY_TOL {
            log::warn!("symmetrizing matrix with relative asymmetry {asym:e}");
        }
        let m = symmetrize(&m);
        let lo = sym_eigen(&m).min();
        if lo <= 0.0 || !lo.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        Ok(SpdMatrix { m })
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn eigen(&self) -> SymEigen {
        sym_eigen(&self.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values.iter().copied().collect()
    }

    /// `|M|`, the largest eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen().max()
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix {
            m: self.eigen().map(|l| 1.0 / l),
        }
    }

    pub fn squared(&self) -> SpdMatrix {
        SpdMatrix {
            m: symmetrize(&(&self.m * &self.m)),
        }
    }

    pub fn scaled(&self, t: f64) -> Result<SpdMatrix> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("scale factor must be positive, got {t}")));
        }
        Ok(SpdMatrix { m: &self.m * t })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.m[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(h: &DMatrix<f64>) -> Result<SpdMatrix> {
    if !h.is_square() {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    if !is_symmetric(h) {
        return Err(Error::invalid(format!(
            "matrix exponential needs a symmetric matrix (asymmetry {:e})",
            asymmetry(h)
        )));
    }
    let m = sym_eigen(h).map(f64::exp);
    SpdMatrix::new(m)
}

/// Principal matrix logarithm; the unique symmetric `H` with `exp(H) = M`.
pub fn spd_log(m: &SpdMatrix) -> DMatrix<f64> {
    m.eigen().map(f64::ln)
}

/// `λ_max / λ_min`, which equals `|M| |M⁻¹|` for SPD matrices.
pub fn condition_number(m: &SpdMatrix) -> f64 {
    let e = m.eigen();
    e.max() / e.min()
}

/// Eigenvalue margins of the Loewner sandwich `lower·I ≤ M ≤ upper·I`:
/// `(λ_min - lower, upper - λ_max)`.
pub fn loewner_margins(m: &SpdMatrix, lower: f64, upper: f64) -> (f64, f64) {
    let e = m.eigen();
    (e.min() - lower, upper - e.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = spd_exp(&DMatrix::zeros(2, 2)).unwrap();
        assert!(max_abs(&(e.as_matrix() - DMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let e = spd_exp(&dmatrix![1.0, 0.0; 0.0, 2.0]).unwrap();
        assert_relative_eq!(e.as_matrix()[(0, 0)], 1f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(e.as_matrix()[(1, 1)], 2f64.exp(), max_relative = 1e-14);
        assert!(e.as_matrix()[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn rank_one_exponential() {
        // exp(log(1+a) x̂⊗x̂) = I + a x̂⊗x̂ with a = 3, x̂ = e₁
        let h = dmatrix![4f64.ln(), 0.0; 0.0, 0.0];
        let e = spd_exp(&h).unwrap();
        assert!(max_abs(&(e.as_matrix() - dmatrix![4.0, 0.0; 0.0, 1.0])) < 1e-14);
    }

    #[test]
    fn exp_rejects_nonsymmetric() {
        let err = spd_exp(&dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn log_examples() {
        assert!(max_abs(&spd_log(&SpdMatrix::identity(2))) < 1e-15);
        let m = SpdMatrix::new(dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let l = spd_log(&m);
        assert_relative_eq!(l[(0, 0)], 4f64.ln(), max_relative = 1e-14);
        assert!(l[(1, 1)].abs() < 1e-15);
        let m = SpdMatrix::from_diagonal(&[2f64.exp(), 1.0]).unwrap();
        let l = spd_log(&m);
        assert_relative_eq!(l[(0, 0)], 2.0, max_relative = 1e-14);
        assert!(l[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn log_of_inverse_is_negated_log() {
        let m = SpdMatrix::new(dmatrix![3.0, 1.0, 0.2; 1.0, 2.0, 0.1; 0.2, 0.1, 1.5]).unwrap();
        let a = spd_log(&m.inverse());
        let b = -spd_log(&m);
        assert!(max_abs(&(a - b)) < 1e-13);
    }

    #[test]
    fn not_positive_definite_is_rejected() {
        let err = SpdMatrix::new(dmatrix![1.0, 0.0; 0.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        let err = SpdMatrix::new(dmatrix![1.0, 1.0; 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SpdMatrix::new(dmatrix![2.0, 1.0; 0.9, 2.0]).unwrap();
        assert_eq!(m.as_matrix()[(0, 1)], m.as_matrix()[(1, 0)]);
        assert_relative_eq!(m.as_matrix()[(0, 1)], 0.95);
    }

    #[test]
    fn condition_numbers() {
        assert_relative_eq!(condition_number(&SpdMatrix::identity(2)), 1.0);
        let theta = 0.5;
        let m = SpdMatrix::new(dmatrix![1.0, 0.0; 0.0, theta]).unwrap();
        assert_relative_eq!(condition_number(&m), 2.0, max_relative = 1e-14);
        let m = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        assert_relative_eq!(condition_number(&m), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn closed_form_2x2_matches_general_solver() {
        let m = dmatrix![2.0, -0.7; -0.7, 0.3];
        let fast = sym_eigen(&m);
        let slow = nalgebra::SymmetricEigen::new(m.clone());
        let mut ev: Vec<f64> = slow.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(fast.values[0], ev[0], max_relative = 1e-13);
        assert_relative_eq!(fast.values[1], ev[1], max_relative = 1e-13);
        let rebuilt = fast.map(|l| l);
        assert!(max_abs(&(rebuilt - m)) < 1e-14);
    }
}
