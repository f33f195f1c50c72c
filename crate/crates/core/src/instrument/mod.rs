//! Instruments over finite outcome spaces.
//!
//! An instrument is stored as an ordered Kraus list per atom. Kraus lists are
//! not unique, so equality is decided on per-atom Choi matrices.

mod posterior;

pub use posterior::{AtomPosterior, PosteriorFamily};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{
    all_finite, identity, max_abs_diff, min_eigenvalue, vectorize, ComplexMatrix,
    DensityOperator, FiniteMeasure, OutcomeSpace, ProjectionValuedMeasure,
};
use crate::Tolerances;

/// Per-atom Kraus collections on a `dim`-dimensional system. An empty list is
/// the zero map at that atom.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausInstrument {
    space: OutcomeSpace,
    dim: usize,
    kraus: Vec<Vec<ComplexMatrix>>,
}

/// Outcome of [`KrausInstrument::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `max |Σ A†A − I|`.
    pub completeness_deviation: f64,
    /// Smallest Choi eigenvalue per atom (0 for empty atoms).
    pub choi_min_eigenvalues: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl KrausInstrument {
    /// Checks shapes and finiteness only; completeness is left to
    /// [`validate`](Self::validate) so that partial instruments can be
    /// built and inspected.
    pub fn new(space: OutcomeSpace, dim: usize, kraus: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("system dimension is zero".into()));
        }
        if kraus.len() != space.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} Kraus lists for {} atoms",
                kraus.len(),
                space.len()
            )));
        }
        for (atom, list) in kraus.iter().enumerate() {
            for a in list {
                if a.shape() != (dim, dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "Kraus operator at atom `{}` has shape {:?}, expected ({dim}, {dim})",
                        space.label(atom),
                        a.shape()
                    )));
                }
                if !all_finite(a) {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(Self { space, dim, kraus })
    }

    /// [`new`](Self::new) followed by a passing [`validate`](Self::validate).
    pub fn new_validated(
        space: OutcomeSpace,
        dim: usize,
        kraus: Vec<Vec<ComplexMatrix>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let t = Self::new(space, dim, kraus)?;
        let report = t.validate(tol);
        if !report.passed {
            return Err(Error::InvalidInstrument(format!(
                "completeness deviation {:.3e}, min Choi eigenvalue {:.3e}",
                report.completeness_deviation,
                report.choi_min_eigenvalues.iter().cloned().fold(0.0, f64::min)
            )));
        }
        Ok(t)
    }

    /// The one-outcome identity instrument.
    pub fn identity(dim: usize) -> Self {
        Self {
            space: OutcomeSpace::new(["id"]).expect("single label"),
            dim,
            kraus: vec![vec![identity(dim)]],
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self, atom: usize) -> &[ComplexMatrix] {
        &self.kraus[atom]
    }

    pub fn kraus_lists(&self) -> &[Vec<ComplexMatrix>] {
        &self.kraus
    }

    /// Total number of Kraus operators over all atoms.
    pub fn kraus_count(&self) -> usize {
        self.kraus.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let total: ComplexMatrix = self.pov_elements().iter().sum();
        let completeness_deviation = max_abs_diff(&total, &identity(self.dim));
        let choi_min_eigenvalues: Vec<f64> = (0..self.space.len())
            .map(|atom| {
                if self.kraus[atom].is_empty() {
                    0.0
                } else {
                    min_eigenvalue(&self.choi(atom))
                }
            })
            .collect();
        let passed = completeness_deviation <= tol.identity
            && choi_min_eigenvalues.iter().all(|&e| e >= -tol.psd_floor);
        ValidationReport {
            completeness_deviation,
            choi_min_eigenvalues,
            tolerance: tol.identity,
            passed,
        }
    }

    /// Choi matrix `Σ_m vec(A_m) vec(A_m)†` of one atom, with row-major
    /// vectorization over matrix units.
    pub fn choi(&self, atom: usize) -> ComplexMatrix {
        let d2 = self.dim * self.dim;
        let mut out = ComplexMatrix::zeros(d2, d2);
        for a in &self.kraus[atom] {
            let v = vectorize(a);
            out += &v * v.adjoint();
        }
        out
    }

    /// `Σ_m A†A` per atom.
    fn pov_elements(&self) -> Vec<ComplexMatrix> {
        self.kraus
            .iter()
            .map(|list| {
                list.iter()
                    .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, a| acc + a.adjoint() * a)
            })
            .collect()
    }

    pub fn pov_measure(&self) -> POVMeasure {
        POVMeasure {
            space: self.space.clone(),
            elements: self.pov_elements(),
        }
    }

    /// Outcome probabilities `tr[ρ M(ω)]`, clamped at zero.
    pub fn outcome_distribution(&self, rho: &DensityOperator) -> Result<FiniteMeasure> {
        self.check_dim(rho.dim())?;
        let weights = self
            .pov_elements()
            .iter()
            .map(|m| (rho.matrix() * m).trace().re.max(0.0))
            .collect();
        FiniteMeasure::new(self.space.clone(), weights)
    }

    /// Heisenberg picture `T(E)[Z] = Σ_{ω∈E} Σ_m A† Z A`.
    pub fn apply(&self, atoms: &[usize], z: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(z.nrows())?;
        self.check_atoms(atoms)?;
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for &atom in atoms {
            for a in &self.kraus[atom] {
                out += a.adjoint() * z * a;
            }
        }
        Ok(out)
    }

    /// Schrödinger picture `Σ_{ω∈E} Σ_m A ρ A†`, unnormalized. Its trace is
    /// the probability of `E`.
    pub fn predual_apply(&self, atoms: &[usize], rho: &DensityOperator) -> Result<ComplexMatrix> {
        self.check_dim(rho.dim())?;
        if atoms.is_empty() {
            return Err(Error::EmptySelection);
        }
        self.check_atoms(atoms)?;
        Ok(self.predual_unchecked(atoms, rho.matrix()))
    }

    pub(crate) fn predual_unchecked(&self, atoms: &[usize], rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for &atom in atoms {
            for a in &self.kraus[atom] {
                out += a * rho * a.adjoint();
            }
        }
        out
    }

    /// Posterior states for every atom together with their probabilities.
    pub fn posterior_family(&self, rho: &DensityOperator) -> Result<PosteriorFamily> {
        self.check_dim(rho.dim())?;
        let pieces = (0..self.space.len())
            .map(|atom| self.predual_unchecked(&[atom], rho.matrix()))
            .collect();
        Ok(PosteriorFamily::from_pieces(
            self.space.clone(),
            pieces,
            Tolerances::default().zero_probability,
        ))
    }

    /// Per-atom Choi equality within `tol` (max-abs).
    pub fn equals(&self, other: &KrausInstrument, tol: f64) -> Result<bool> {
        self.space.ensure_same(&other.space)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "system dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(self.choi_distance(other) <= tol)
    }

    /// Largest per-atom Choi max-abs difference. Assumes compatible shapes.
    pub fn choi_distance(&self, other: &KrausInstrument) -> f64 {
        (0..self.space.len())
            .map(|atom| max_abs_diff(&self.choi(atom), &other.choi(atom)))
            .fold(0.0, f64::max)
    }

    /// Measure `self` first and `second` afterwards. Atom `(ω₁, ω₂)` carries
    /// `B_{ω₂,n} A_{ω₁,m}`, ordered first-outcome-major.
    pub fn sequential_compose(&self, second: &KrausInstrument) -> Result<KrausInstrument> {
        if self.dim != second.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose instruments on dimensions {} and {}",
                self.dim, second.dim
            )));
        }
        let mut kraus = Vec::with_capacity(self.space.len() * second.space.len());
        for first_list in &self.kraus {
            for second_list in &second.kraus {
                kraus.push(
                    first_list
                        .iter()
                        .flat_map(|a| second_list.iter().map(move |b| b * a))
                        .collect(),
                );
            }
        }
        Ok(KrausInstrument {
            space: self.space.product(&second.space),
            dim: self.dim,
            kraus,
        })
    }

    /// Every Kraus operator multiplied by a common scalar; the result is
    /// generally not normalized.
    pub fn scaled_atom(&self, atom: usize, factor: f64) -> KrausInstrument {
        let mut out = self.clone();
        for a in &mut out.kraus[atom] {
            *a *= Complex64::new(factor, 0.0);
        }
        out
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "operator of dimension {dim} on a {}-dimensional system",
                self.dim
            )))
        }
    }

    fn check_atoms(&self, atoms: &[usize]) -> Result<()> {
        match atoms.iter().find(|&&a| a >= self.space.len()) {
            Some(a) => Err(Error::DimensionMismatch(format!("atom index {a} out of range"))),
            None => Ok(()),
        }
    }
}

/// [`KrausInstrument::equals`] as a free function.
pub fn instruments_equal(t1: &KrausInstrument, t2: &KrausInstrument, tol: f64) -> Result<bool> {
    t1.equals(t2, tol)
}

/// One Kraus operator `P_j` per labelled projection.
pub fn von_neumann_instrument(
    space: OutcomeSpace,
    projections: Vec<ComplexMatrix>,
) -> Result<KrausInstrument> {
    let pvm = ProjectionValuedMeasure::new(space, projections).map_err(|e| match e {
        Error::InvalidProjectionMeasure(msg) => Error::NotAProjectionFamily(msg),
        other => other,
    })?;
    let dim = pvm.dim();
    KrausInstrument::new(
        pvm.space().clone(),
        dim,
        pvm.projections().iter().map(|p| vec![p.clone()]).collect(),
    )
}

/// Positive-operator-valued measure on a finite outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct POVMeasure {
    space: OutcomeSpace,
    elements: Vec<ComplexMatrix>,
}

impl POVMeasure {
    /// Validates positivity of every element and completeness.
    pub fn new(space: OutcomeSpace, elements: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        if elements.len() != space.len() || elements.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} elements for {} atoms",
                elements.len(),
                space.len()
            )));
        }
        let dim = elements[0].nrows();
        for (atom, m) in elements.iter().enumerate() {
            if m.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("element {atom} has shape {:?}", m.shape())));
            }
            if min_eigenvalue(m) < -tol.psd_floor {
                return Err(Error::InvalidInstrument(format!(
                    "POV element at `{}` is not positive",
                    space.label(atom)
                )));
            }
        }
        let total: ComplexMatrix = elements.iter().sum();
        let deviation = max_abs_diff(&total, &identity(dim));
        if deviation > tol.identity {
            return Err(Error::InvalidInstrument(format!(
                "POV elements sum to identity only within {deviation:.3e}"
            )));
        }
        Ok(Self { space, elements })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn element(&self, atom: usize) -> &ComplexMatrix {
        &self.elements[atom]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// Largest max-abs difference to another POV measure on the same atoms.
    pub fn distance(&self, other: &POVMeasure) -> f64 {
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }
}
