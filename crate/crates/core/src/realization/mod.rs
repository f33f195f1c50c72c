//! Statistical realizations `{K, S, P, U}` of instruments.
//!
//! The ancilla `K` is `C^{d_K}`; operators on `H_S ⊗ K` use the
//! system-major convention of [`tensor_product`](crate::qcore::tensor_product).

mod canonical;
mod construct;
mod invariants;
mod vq;

pub use canonical::{canonicalize, CanonicalForm};
pub use construct::{dilate, indirect_realization, von_neumann_process, DilationMode};
pub use invariants::{channel_operators_direct, invariants, InvariantComparison, InvariantSet};
pub(crate) use invariants::phase_aligned_deviation;
pub use vq::{extract_vq, OperatorTable, ScalarTable, VQFamily};
pub(crate) use vq::{operator_orthonormality, scalar_orthonormality};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::qcore::{
    identity, partial_expectation, tensor_product, ComplexMatrix, ComplexVector, DensityOperator,
    OutcomeSpace, ProjectionValuedMeasure, UnitaryOperator,
};
use crate::Tolerances;

/// Ancilla state, pointer PVM and coupling unitary for a `dim_s`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalRealization {
    dim_s: usize,
    s: DensityOperator,
    p: ProjectionValuedMeasure,
    u: UnitaryOperator,
}

impl StatisticalRealization {
    pub fn new(
        dim_s: usize,
        s: DensityOperator,
        p: ProjectionValuedMeasure,
        u: UnitaryOperator,
    ) -> Result<Self> {
        let dim_k = s.dim();
        if p.dim() != dim_k {
            return Err(Error::DimensionMismatch(format!(
                "ancilla state has dimension {dim_k}, PVM acts on dimension {}",
                p.dim()
            )));
        }
        if dim_s == 0 || u.dim() != dim_s * dim_k {
            return Err(Error::DimensionMismatch(format!(
                "unitary of dimension {} on a {dim_s}x{dim_k} product space",
                u.dim()
            )));
        }
        Ok(Self { dim_s, s, p, u })
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_k(&self) -> usize {
        self.s.dim()
    }

    pub fn space(&self) -> &OutcomeSpace {
        self.p.space()
    }

    pub fn state(&self) -> &DensityOperator {
        &self.s
    }

    pub fn pvm(&self) -> &ProjectionValuedMeasure {
        &self.p
    }

    pub fn unitary(&self) -> &UnitaryOperator {
        &self.u
    }

    /// `T({ω})[A] = E_S[U†(A ⊗ P({ω}))U]` evaluated directly.
    pub fn heisenberg_direct(&self, atom: usize, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let u = self.u.matrix();
        let q = u.adjoint() * tensor_product(a, self.p.projection(atom)) * u;
        partial_expectation(&q, &self.s)
    }

    /// The instrument generated by this realization, in Kraus form.
    pub fn instrument(&self) -> Result<KrausInstrument> {
        instrument_of(self)
    }

    /// `S' = W⁻¹SW`, `P'(·) = W⁻¹P(·)W`, `U' = e^{iφ}(I⊗W⁻¹)U(I⊗W)`.
    pub fn apply_unitary_equivalence(&self, w: &UnitaryOperator, phase: f64) -> Result<Self> {
        if w.dim() != self.dim_k() {
            return Err(Error::DimensionMismatch(format!(
                "equivalence unitary of dimension {} on an ancilla of dimension {}",
                w.dim(),
                self.dim_k()
            )));
        }
        let w = w.matrix();
        let w_inv = w.adjoint();
        let s = DensityOperator::from_positive_unchecked(&(&w_inv * self.s.matrix() * w));
        let lift = tensor_product(&identity(self.dim_s), w);
        let u = lift.adjoint() * self.u.matrix() * &lift * Complex64::from_polar(1.0, phase);
        Ok(Self {
            dim_s: self.dim_s,
            s,
            p: self.p.conjugated(w),
            u: UnitaryOperator::with_tol(u, 1e-8)?,
        })
    }
}

/// Kraus form of the realization's instrument.
///
/// Atom ω carries `√(α⁽ⁱ⁾ ν(ω)) V[i][k][n](ω)` over all indices, built from
/// [`extract_vq`] with the default canonical form.
pub fn instrument_of(g: &StatisticalRealization) -> Result<KrausInstrument> {
    let tol = Tolerances::default();
    let cf = canonicalize(g, None)?;
    let vq = extract_vq(g, &cf, &tol)?;
    Ok(vq.instrument(g.space().clone(), g.dim_s()))
}

/// [`StatisticalRealization::apply_unitary_equivalence`] as a free function.
pub fn apply_unitary_equivalence(
    g: &StatisticalRealization,
    w: &UnitaryOperator,
    phase: f64,
) -> Result<StatisticalRealization> {
    g.apply_unitary_equivalence(w, phase)
}

/// Partial matrix element `⟨bra| X |ket⟩` of an operator on `H_S ⊗ K`, an
/// operator on `H_S`.
pub(crate) fn partial_element(
    x: &ComplexMatrix,
    dim_s: usize,
    bra: &ComplexVector,
    ket: &ComplexVector,
) -> ComplexMatrix {
    let dk = bra.len();
    ComplexMatrix::from_fn(dim_s, dim_s, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..dk {
            let bk = bra[k].conj();
            if bk == Complex64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..dk {
                acc += bk * x[(a * dk + k, b * dk + l)] * ket[l];
            }
        }
        acc
    })
}
