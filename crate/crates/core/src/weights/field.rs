use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::weights::spd::{spd_log, SpdMatrix};

/// Points closer than this to a declared singular point are rejected.
pub const SINGULAR_RADIUS: f64 = 1e-300;

type Eval<T> = Arc<dyn Fn(&[f64]) -> Result<T> + Send + Sync>;

/// A labeled, stateless map `ℝⁿ → T` with declared singular points.
pub struct Field<T> {
    dim: usize,
    label: String,
    singular_points: Vec<Vec<f64>>,
    eval: Eval<T>,
}

impl<T> Clone for Field<T> {
    fn clone(&self) -> Self {
        Field {
            dim: self.dim,
            label: self.label.clone(),
            singular_points: self.singular_points.clone(),
            eval: Arc::clone(&self.eval),
        }
    }
}

impl<T> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("singular_points", &self.singular_points)
            .finish_non_exhaustive()
    }
}

impl<T: 'static> Field<T> {
    pub fn new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<T> + Send + Sync + 'static,
    {
        Field {
            dim,
            label: label.into(),
            singular_points: Vec::new(),
            eval: Arc::new(f),
        }
    }

    pub fn with_singular_point(mut self, p: Vec<f64>) -> Self {
        self.singular_points.push(p);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular_points
    }

    pub fn eval(&self, x: &[f64]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "field {} is {}-dimensional, got a point of length {}",
                self.label,
                self.dim,
                x.len()
            )));
        }
        for s in &self.singular_points {
            let d2: f64 = s.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() < SINGULAR_RADIUS {
                return Err(Error::SingularPoint { point: x.to_vec() });
            }
        }
        (self.eval)(x)
    }

    /// Pointwise post-composition, keeping dimension and singular points.
    pub fn map<U: 'static, G>(&self, label: impl Into<String>, g: G) -> Field<U>
    where
        G: Fn(T) -> Result<U> + Send + Sync + 'static,
    {
        let inner = self.clone();
        Field {
            dim: self.dim,
            label: label.into(),
            singular_points: self.singular_points.clone(),
            eval: Arc::new(move |x| g((inner.eval)(x)?)),
        }
    }
}

/// Real-valued field, e.g. `log ω`.
pub type ScalarField = Field<f64>;

/// Symmetric-matrix-valued field, e.g. `log M`.
pub type MatrixField = Field<DMatrix<f64>>;

/// Matrix weight `M(x)`.
#[derive(Clone, Debug)]
pub struct WeightField {
    field: Field<SpdMatrix>,
    condition_bound: Option<f64>,
}

impl WeightField {
    pub fn new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<SpdMatrix> + Send + Sync + 'static,
    {
        WeightField {
            field: Field::new(dim, label, f),
            condition_bound: None,
        }
    }

    /// The constant weight `C`.
    pub fn constant(c: SpdMatrix, label: impl Into<String>) -> Self {
        let bound = crate::weights::spd::condition_number(&c);
        let dim = c.dim();
        WeightField::new(dim, label, move |_| Ok(c.clone())).with_condition_bound(bound)
    }

    pub fn with_singular_point(mut self, p: Vec<f64>) -> Self {
        self.field = self.field.with_singular_point(p);
        self
    }

    /// Declares the ellipticity ratio `Λ ≥ |M(x)||M⁻¹(x)|`.
    pub fn with_condition_bound(mut self, lambda: f64) -> Self {
        self.condition_bound = Some(lambda);
        self
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn label(&self) -> &str {
        self.field.label()
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        self.field.singular_points()
    }

    pub fn condition_bound(&self) -> Option<f64> {
        self.condition_bound
    }

    pub fn eval(&self, x: &[f64]) -> Result<SpdMatrix> {
        self.field.eval(x)
    }

    pub fn as_field(&self) -> &Field<SpdMatrix> {
        &self.field
    }

    /// `x ↦ M(x)⁻¹`.
    pub fn inverse(&self) -> WeightField {
        WeightField {
            field: self
                .field
                .map(format!("inverse({})", self.label()), |m| Ok(m.inverse())),
            condition_bound: self.condition_bound,
        }
    }

    /// `𝔸 = M²`.
    pub fn squared(&self) -> WeightField {
        WeightField {
            field: self.field.map(format!("squared({})", self.label()), |m| Ok(m.squared())),
            condition_bound: self.condition_bound.map(|l| l * l),
        }
    }

    pub fn scaled(&self, t: f64) -> Result<WeightField> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("scale factor must be positive, got {t}")));
        }
        Ok(WeightField {
            field: self.field.map(format!("{t}*{}", self.label()), move |m| m.scaled(t)),
            condition_bound: self.condition_bound,
        })
    }

    /// `ω(x) = |M(x)|`.
    pub fn scalar(&self) -> ScalarWeightField {
        ScalarWeightField {
            field: self
                .field
                .map(format!("norm({})", self.label()), |m| Ok(m.spectral_norm())),
            provenance: Provenance::DerivedFromMatrix(self.label().to_string()),
        }
    }

    /// `x ↦ log M(x)`.
    pub fn log_field(&self) -> MatrixField {
        self.field.map(format!("log({})", self.label()), |m| Ok(spd_log(&m)))
    }

    /// `M` itself as a symmetric-matrix field.
    pub fn matrix_field(&self) -> MatrixField {
        self.field.map(self.label().to_string(), |m| Ok(m.into_matrix()))
    }

    /// Largest `|M(x)||M⁻¹(x)|` over the given points, skipping singular ones.
    pub fn sampled_condition(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 1.0_f64;
        for x in points {
            match self.eval(x) {
                Ok(m) => worst = worst.max(crate::weights::spd::condition_number(&m)),
                Err(Error::SingularPoint { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// `ω = |M|` for the named matrix weight.
    DerivedFromMatrix(String),
    Standalone,
}

/// Positive scalar weight `ω(x)`.
#[derive(Clone, Debug)]
pub struct ScalarWeightField {
    field: Field<f64>,
    provenance: Provenance,
}

impl ScalarWeightField {
    pub fn new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarWeightField {
            field: Field::new(dim, label, f),
            provenance: Provenance::Standalone,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("weight value must be positive, got {c}")));
        }
        Ok(Self::new(dim, format!("constant({c})"), move |_| Ok(c)))
    }

    /// `|x|^a`, singular at the origin unless `a = 0`.
    pub fn power(dim: usize, a: f64) -> Self {
        let w = Self::new(dim, format!("|x|^{a}"), move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(r.powf(a))
        });
        if a != 0.0 {
            w.with_singular_point(vec![0.0; dim])
        } else {
            w
        }
    }

    pub fn with_singular_point(mut self, p: Vec<f64>) -> Self {
        self.field = self.field.with_singular_point(p);
        self
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn label(&self) -> &str {
        self.field.label()
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        self.field.singular_points()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.field.eval(x)?;
        if !(v > 0.0) {
            return Err(Error::invalid(format!(
                "weight {} is not positive at {x:?}: {v}",
                self.label()
            )));
        }
        Ok(v)
    }

    fn derived(&self, label: String, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarWeightField {
        ScalarWeightField {
            field: self.field.map(label, move |v| Ok(g(v))),
            provenance: Provenance::Standalone,
        }
    }

    /// `1/ω`.
    pub fn inverse(&self) -> ScalarWeightField {
        self.derived(format!("1/{}", self.label()), |v| 1.0 / v)
    }

    pub fn scaled(&self, t: f64) -> ScalarWeightField {
        self.derived(format!("{t}*{}", self.label()), move |v| t * v)
    }

    /// `ω^s`.
    pub fn powf(&self, s: f64) -> ScalarWeightField {
        self.derived(format!("{}^{s}", self.label()), move |v| v.powf(s))
    }

    pub fn log_field(&self) -> ScalarField {
        self.field.map(format!("log({})", self.label()), |v| Ok(v.ln()))
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.field
    }
}
