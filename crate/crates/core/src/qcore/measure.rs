use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::linalg::{all_finite, hermiticity_deviation, identity, max_abs, max_abs_diff, ComplexMatrix};
use crate::Tolerances;

/// Ordered list of distinct outcome labels. Atom indices refer to this order,
/// which sampling and serialization both depend on.
#[derive(Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Arc<[String]>,
}

impl fmt::Debug for OutcomeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels.iter()).finish()
    }
}

impl OutcomeSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidOutcomeSpace("no atoms".into()));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidOutcomeSpace(format!(
                    "duplicate label `{label}`"
                )));
            }
        }
        Ok(Self {
            labels: labels.into(),
        })
    }

    /// Atoms labelled `0, 1, …, count − 1`.
    pub fn indexed(count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, atom: usize) -> &str {
        &self.labels[atom]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Product space with first-factor-major ordering; labels read `(a, b)`.
    pub fn product(&self, other: &OutcomeSpace) -> OutcomeSpace {
        let labels: Vec<String> = self
            .labels
            .iter()
            .flat_map(|a| other.labels.iter().map(move |b| format!("({a}, {b})")))
            .collect();
        OutcomeSpace {
            labels: labels.into(),
        }
    }

    pub(crate) fn ensure_same(&self, other: &OutcomeSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::IncompatibleOutcomeSpaces)
        }
    }
}

/// Anything that assigns a complex value to each atom.
pub trait AtomicMeasure {
    fn space(&self) -> &OutcomeSpace;
    fn value(&self, atom: usize) -> Complex64;
}

/// Finite positive measure given by its atom weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    space: OutcomeSpace,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(space: OutcomeSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {} atoms",
                weights.len(),
                space.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not a finite nonnegative number")));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidMeasure("total weight is zero".into()));
        }
        Ok(Self { space, weights })
    }

    /// Weight 1 on every atom.
    pub fn counting(space: &OutcomeSpace) -> Self {
        Self {
            weights: vec![1.0; space.len()],
            space: space.clone(),
        }
    }

    /// Weight 1 on the listed atoms, 0 elsewhere.
    pub fn counting_on(space: &OutcomeSpace, support: &[usize]) -> Result<Self> {
        let mut weights = vec![0.0; space.len()];
        for &atom in support {
            weights[atom] = 1.0;
        }
        Self::new(space.clone(), weights)
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Atoms with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Mutual absolute continuity: identical supports.
    pub fn is_equivalent(&self, other: &FiniteMeasure) -> bool {
        self.space == other.space && self.support() == other.support()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.space.clone(), self.weights.iter().map(|w| w * factor).collect())
    }
}

impl AtomicMeasure for FiniteMeasure {
    fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    fn value(&self, atom: usize) -> Complex64 {
        Complex64::new(self.weights[atom], 0.0)
    }
}

/// Complex scalar measure on a finite outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMeasure {
    space: OutcomeSpace,
    values: Vec<Complex64>,
}

impl ComplexMeasure {
    pub fn new(space: OutcomeSpace, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} values for {} atoms",
                values.len(),
                space.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { space, values })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

impl AtomicMeasure for ComplexMeasure {
    fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    fn value(&self, atom: usize) -> Complex64 {
        self.values[atom]
    }
}

/// Atomwise density `dμ/dν`. Atoms where the base vanishes get density 0,
/// which requires `μ` to vanish there too.
pub fn radon_nikodym<M: AtomicMeasure>(mu: &M, base: &FiniteMeasure) -> Result<Vec<Complex64>> {
    mu.space().ensure_same(base.space())?;
    (0..base.space().len())
        .map(|atom| {
            let value = mu.value(atom);
            let weight = base.weight(atom);
            if weight > 0.0 {
                Ok(value / weight)
            } else if value == Complex64::new(0.0, 0.0) {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Err(Error::NotAbsolutelyContinuous {
                    atom: base.space().label(atom).to_string(),
                })
            }
        })
        .collect()
}

/// Projection-valued measure on an ancilla space: one orthogonal projection
/// per atom, mutually orthogonal, summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionValuedMeasure {
    space: OutcomeSpace,
    dim: usize,
    projections: Vec<ComplexMatrix>,
}

impl ProjectionValuedMeasure {
    pub fn new(space: OutcomeSpace, projections: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tol(space, projections, &Tolerances::default())
    }

    pub fn with_tol(
        space: OutcomeSpace,
        projections: Vec<ComplexMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let invalid = Error::InvalidProjectionMeasure;
        if projections.len() != space.len() {
            return Err(invalid(format!(
                "{} projections for {} atoms",
                projections.len(),
                space.len()
            )));
        }
        let dim = projections[0].nrows();
        for (atom, p) in projections.iter().enumerate() {
            let label = space.label(atom);
            if p.shape() != (dim, dim) {
                return Err(invalid(format!("atom `{label}` has shape {:?}", p.shape())));
            }
            if !all_finite(p) {
                return Err(Error::NonFinite);
            }
            if hermiticity_deviation(p) > tol.identity {
                return Err(invalid(format!("atom `{label}` is not Hermitian")));
            }
            if max_abs_diff(&(p * p), p) > tol.identity {
                return Err(invalid(format!("atom `{label}` is not idempotent")));
            }
        }
        for a in 0..projections.len() {
            for b in a + 1..projections.len() {
                if max_abs(&(&projections[a] * &projections[b])) > tol.identity {
                    return Err(invalid(format!(
                        "atoms `{}` and `{}` are not orthogonal",
                        space.label(a),
                        space.label(b)
                    )));
                }
            }
        }
        let total: ComplexMatrix = projections.iter().sum();
        let deviation = max_abs_diff(&total, &identity(dim));
        if deviation > tol.identity {
            return Err(invalid(format!(
                "projections sum to identity only within {deviation:.3e}"
            )));
        }
        Ok(Self {
            space,
            dim,
            projections,
        })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projection(&self, atom: usize) -> &ComplexMatrix {
        &self.projections[atom]
    }

    pub fn projections(&self) -> &[ComplexMatrix] {
        &self.projections
    }

    pub fn rank(&self, atom: usize) -> usize {
        self.projections[atom].trace().re.round().max(0.0) as usize
    }

    /// Atoms carrying a non-zero projection.
    pub fn support(&self) -> Vec<usize> {
        (0..self.projections.len()).filter(|&a| self.rank(a) > 0).collect()
    }

    /// `W⁻¹ P(·) W`.
    pub fn conjugated(&self, w: &ComplexMatrix) -> Self {
        let w_inv = w.adjoint();
        Self {
            space: self.space.clone(),
            dim: self.dim,
            projections: self.projections.iter().map(|p| &w_inv * p * w).collect(),
        }
    }
}
