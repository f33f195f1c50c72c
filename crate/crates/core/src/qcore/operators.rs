use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::linalg::{
    all_finite, hermiticity_deviation, identity, isometry_deviation, min_eigenvalue, outer,
    ComplexMatrix, ComplexVector,
};
use crate::Tolerances;

/// A validated statistical operator: Hermitian, positive semidefinite and of
/// unit trace, all within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tol(matrix, &Tolerances::default())
    }

    pub fn with_tol(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensity(format!(
                "shape {}x{} is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !all_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let herm = hermiticity_deviation(&matrix);
        if herm > tol.identity {
            return Err(Error::InvalidDensity(format!(
                "hermitian: deviation {herm:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > tol.identity {
            return Err(Error::InvalidDensity(format!(
                "trace: {:.12} differs from 1",
                trace.re
            )));
        }
        let lowest = min_eigenvalue(&matrix);
        if lowest < -tol.psd_floor {
            return Err(Error::InvalidDensity(format!(
                "positivity: eigenvalue {lowest:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a unit vector `ψ`.
    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > Tolerances::default().identity {
            return Err(Error::InvalidDensity(format!(
                "pure state vector has norm {norm}"
            )));
        }
        Self::new(outer(psi, psi))
    }

    /// Normalizes a positive operator with non-zero trace.
    pub fn normalized(matrix: &ComplexMatrix) -> Result<Self> {
        let trace = matrix.trace().re;
        if trace <= 0.0 || !trace.is_finite() {
            return Err(Error::InvalidDensity(format!(
                "cannot normalize operator with trace {trace}"
            )));
        }
        Self::new(matrix / Complex64::new(trace, 0.0))
    }

    /// Hermitizes and divides by the trace without re-validating. Used for
    /// posteriors whose positivity holds by construction but whose tiny
    /// normalizers would amplify rounding past the default tolerances.
    pub(crate) fn from_positive_unchecked(matrix: &ComplexMatrix) -> Self {
        let herm = (matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = herm.trace().re;
        Self {
            matrix: herm / Complex64::new(trace, 0.0),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim) / Complex64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// A validated unitary: `U†U = I` within tolerance (max-abs).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tol(matrix, Tolerances::default().identity)
    }

    pub fn with_tol(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "unitary must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !all_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let deviation = isometry_deviation(&matrix);
        if deviation > tol {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }
}
