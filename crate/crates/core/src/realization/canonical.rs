use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{fix_phase, ComplexMatrix, ComplexVector, FiniteMeasure, UnitaryOperator};
use crate::realization::StatisticalRealization;

const DEPENDENCY_TOL: f64 = 1e-6;

/// Block decomposition of the ancilla along the pointer PVM.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    nu: FiniteMeasure,
    dims: Vec<usize>,
    basis: Vec<Vec<ComplexVector>>,
    r: UnitaryOperator,
}

impl CanonicalForm {
    /// Base measure, positive exactly on the PVM support.
    pub fn nu(&self) -> &FiniteMeasure {
        &self.nu
    }

    /// Multiplicity `N(ω) = rank P({ω})`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Orthonormal basis `e_n(ω)` of `range P({ω})`.
    pub fn block_basis(&self, atom: usize) -> &[ComplexVector] {
        &self.basis[atom]
    }

    /// Unitary on `K` sending `e_n(ω)` to the coordinate vector at position
    /// `Σ_{ω'<ω} N(ω') + n`.
    pub fn canonicalizing_unitary(&self) -> &UnitaryOperator {
        &self.r
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.dims.len()).filter(|&a| self.dims[a] > 0).collect()
    }
}

/// Canonical form of the realization's PVM.
///
/// The block basis of each atom is obtained by Gram–Schmidt on `P({ω}) e_j`
/// over the standard basis in index order, each vector phase-fixed so its
/// largest component is real positive. `nu` defaults to weight 1 on every
/// support atom.
pub fn canonicalize(g: &StatisticalRealization, nu: Option<&FiniteMeasure>) -> Result<CanonicalForm> {
    let pvm = g.pvm();
    let space = pvm.space();
    let dims: Vec<usize> = (0..space.len()).map(|a| pvm.rank(a)).collect();
    let support: Vec<usize> = (0..space.len()).filter(|&a| dims[a] > 0).collect();

    let nu = match nu {
        None => FiniteMeasure::counting_on(space, &support)?,
        Some(nu) => {
            if nu.space() != space {
                return Err(Error::IncompatibleOutcomeSpaces);
            }
            if let Some(atom) = (0..space.len()).find(|&a| (nu.weight(a) > 0.0) != (dims[a] > 0)) {
                let kind = if dims[atom] > 0 { "vanishes on support atom" } else { "charges null atom" };
                return Err(Error::UnsupportedMeasure(format!("{kind} `{}`", space.label(atom))));
            }
            nu.clone()
        }
    };

    let dk = pvm.dim();
    let basis: Vec<Vec<ComplexVector>> = (0..space.len())
        .map(|atom| block_basis(pvm.projection(atom), dims[atom], dk))
        .collect();

    let rows: Vec<&ComplexVector> = basis.iter().flatten().collect();
    if rows.len() != dk {
        return Err(Error::InvalidProjectionMeasure(format!(
            "block bases span {} of {dk} dimensions",
            rows.len()
        )));
    }
    let r = ComplexMatrix::from_fn(dk, dk, |row, col| rows[row][col].conj());
    let r = UnitaryOperator::with_tol(r, 1e-8)?;
    Ok(CanonicalForm { nu, dims, basis, r })
}

fn block_basis(p: &ComplexMatrix, rank: usize, dk: usize) -> Vec<ComplexVector> {
    let mut out: Vec<ComplexVector> = Vec::with_capacity(rank);
    let residual = |v: ComplexVector, out: &[ComplexVector]| {
        let mut v = v;
        for _ in 0..2 {
            for e in out {
                let overlap: Complex64 = e.dotc(&v);
                v -= e * overlap;
            }
        }
        v
    };
    for j in 0..dk {
        if out.len() == rank {
            break;
        }
        let v = residual(p.column(j).into_owned(), &out);
        let norm = v.norm();
        if norm > DEPENDENCY_TOL {
            out.push(phase_fixed(v / Complex64::new(norm, 0.0)));
        }
    }
    out
}

fn phase_fixed(v: ComplexVector) -> ComplexVector {
    let (m, _) = fix_phase(&ComplexMatrix::from_iterator(v.len(), 1, v.iter().cloned()));
    m.column(0).into_owned()
}
