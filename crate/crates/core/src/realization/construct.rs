use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instrument::{von_neumann_instrument, KrausInstrument};
use crate::qcore::{
    identity, isometry_deviation, max_abs, outer, tensor_product, unitary_mapping, ComplexMatrix,
    ComplexVector, DensityOperator, FiniteMeasure, OutcomeSpace, ProjectionValuedMeasure,
};
use crate::realization::StatisticalRealization;
use crate::Tolerances;

/// Choice of ancilla state in [`dilate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DilationMode {
    /// `η` is the first pointer vector.
    Minimal,
    /// `η` is the uniform superposition of all pointer vectors, so every
    /// scalar component is non-zero.
    Invariant,
}

fn basis(dim: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[index] = Complex64::new(1.0, 0.0);
    v
}

/// Columns `e_s ⊗ η` for `s < dim_s`.
fn product_inputs(dim_s: usize, eta: &ComplexVector) -> ComplexMatrix {
    let dk = eta.len();
    ComplexMatrix::from_fn(dim_s * dk, dim_s, |row, col| {
        if row / dk == col {
            eta[row % dk]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Column `s` is `Σ_j (A_j e_s) ⊗ χ_j`.
fn entangled_outputs(dim_s: usize, terms: &[(ComplexMatrix, ComplexVector)]) -> ComplexMatrix {
    let dk = terms.first().map_or(1, |(_, chi)| chi.len());
    let mut out = ComplexMatrix::zeros(dim_s * dk, dim_s);
    for (a, chi) in terms {
        out += tensor_product(a, &ComplexMatrix::from_iterator(dk, 1, chi.iter().cloned()));
    }
    out
}

/// Realizes a valid instrument on an ancilla with one pointer vector
/// `χ_{ω,m}` per Kraus operator, coupling `ψ ⊗ η ↦ Σ A_{ω,m}ψ ⊗ χ_{ω,m}`.
pub fn dilate(t: &KrausInstrument, mode: DilationMode) -> Result<StatisticalRealization> {
    let tol = Tolerances::default();
    let report = t.validate(&tol);
    if !report.passed {
        return Err(Error::InvalidInstrument(format!(
            "completeness deviation {:.3e}",
            report.completeness_deviation
        )));
    }
    let dk = t.kraus_count();
    if dk == 0 {
        return Err(Error::InvalidInstrument("no Kraus operators".into()));
    }
    let dim_s = t.dim();

    let mut terms = Vec::with_capacity(dk);
    let mut projections = Vec::with_capacity(t.space().len());
    for atom in 0..t.space().len() {
        let mut p = ComplexMatrix::zeros(dk, dk);
        for a in t.kraus(atom) {
            let idx = terms.len();
            p[(idx, idx)] = Complex64::new(1.0, 0.0);
            terms.push((a.clone(), basis(dk, idx)));
        }
        projections.push(p);
    }
    let eta = match mode {
        DilationMode::Minimal => basis(dk, 0),
        DilationMode::Invariant => {
            ComplexVector::from_element(dk, Complex64::new(1.0 / (dk as f64).sqrt(), 0.0))
        }
    };
    let u = unitary_mapping(
        &product_inputs(dim_s, &eta),
        &entangled_outputs(dim_s, &terms),
        1e-8,
    )?;
    StatisticalRealization::new(
        dim_s,
        DensityOperator::pure(&eta)?,
        ProjectionValuedMeasure::new(t.space().clone(), projections)?,
        u,
    )
}

/// von Neumann measuring process: `U(ψ ⊗ η) = Σ_j P_jψ ⊗ η_j` with pointer
/// PVM `|η_j⟩⟨η_j|`.
///
/// When the ancilla is larger than the number of outcomes, the orthogonal
/// complement of the pointers is added to the last atom's projection so the
/// PVM stays complete; `U(ψ ⊗ η)` has no component there.
pub fn von_neumann_process(
    space: OutcomeSpace,
    projections: Vec<ComplexMatrix>,
    eta: &ComplexVector,
    pointers: &[ComplexVector],
) -> Result<StatisticalRealization> {
    let instrument = von_neumann_instrument(space, projections)?;
    let outcomes = instrument.space().len();
    let dk = eta.len();
    if pointers.len() != outcomes {
        return Err(Error::DimensionMismatch(format!(
            "{} pointer states for {outcomes} outcomes",
            pointers.len()
        )));
    }
    if dk < outcomes {
        return Err(Error::DimensionTooSmall { dim_k: dk, outcomes });
    }
    if let Some(p) = pointers.iter().find(|p| p.len() != dk) {
        return Err(Error::DimensionMismatch(format!(
            "pointer of dimension {} in an ancilla of dimension {dk}",
            p.len()
        )));
    }
    let gram = ComplexMatrix::from_fn(outcomes, outcomes, |a, b| pointers[a].dotc(&pointers[b]));
    let deviation = max_abs(&(gram - identity(outcomes)));
    if deviation > Tolerances::default().identity {
        return Err(Error::PointerOverlap { deviation });
    }

    let mut pvm: Vec<ComplexMatrix> = pointers.iter().map(|p| outer(p, p)).collect();
    let covered: ComplexMatrix = pvm.iter().sum();
    if let Some(last) = pvm.last_mut() {
        *last += identity(dk) - covered;
    }
    let dim_s = instrument.dim();
    let terms: Vec<(ComplexMatrix, ComplexVector)> = (0..outcomes)
        .map(|j| (instrument.kraus(j)[0].clone(), pointers[j].clone()))
        .collect();
    let u = unitary_mapping(&product_inputs(dim_s, eta), &entangled_outputs(dim_s, &terms), 1e-8)?;
    StatisticalRealization::new(
        dim_s,
        DensityOperator::pure(eta)?,
        ProjectionValuedMeasure::new(instrument.space().clone(), pvm)?,
        u,
    )
}

/// Indirect measurement realizing
/// `T(E)[A] = Σ_i β_i Σ_{ω∈E} Σ_n V_in(ω)† A V_in(ω) |q_in(ω)|² ν(ω)`.
///
/// `q[i][ω][n]` and `v[i][ω][n]` run over `n < N(ω)`, where `N(ω) ≥ 1`
/// exactly on the support of `nu`. The ancilla is `⊕_ω C^{N(ω)}` with the
/// coordinate PVM, the state is `Σ β_i |φ_i⟩⟨φ_i|` with
/// `φ_i = Σ q_in(ω) √ν(ω) e_n(ω)`, and
/// `U(ψ ⊗ φ_i) = Σ √ν(ω) q_in(ω) V_in(ω)ψ ⊗ e_n(ω)`.
pub fn indirect_realization(
    beta: &[f64],
    nu: &FiniteMeasure,
    q: &[Vec<Vec<Complex64>>],
    v: &[Vec<Vec<ComplexMatrix>>],
    dim_s: usize,
) -> Result<StatisticalRealization> {
    let tol = Tolerances::default();
    let channels = beta.len();
    if channels == 0 || q.len() != channels || v.len() != channels {
        return Err(Error::WeightMismatch(format!(
            "{channels} weights, {} scalar tables, {} operator tables",
            q.len(),
            v.len()
        )));
    }
    if beta.iter().any(|&b| !(b >= 0.0)) || (beta.iter().sum::<f64>() - 1.0).abs() > tol.identity {
        return Err(Error::WeightMismatch(format!("weights {beta:?} are not a probability vector")));
    }
    let space = nu.space();
    let atoms = space.len();
    let dims: Vec<usize> = (0..atoms).map(|a| q[0].get(a).map_or(0, Vec::len)).collect();
    for i in 0..channels {
        if q[i].len() != atoms || v[i].len() != atoms {
            return Err(Error::DimensionMismatch(format!("channel {i} tables do not cover {atoms} atoms")));
        }
        for atom in 0..atoms {
            if q[i][atom].len() != dims[atom] || v[i][atom].len() != dims[atom] {
                return Err(Error::DimensionMismatch(format!(
                    "channel {i} has inconsistent block size at atom `{}`",
                    space.label(atom)
                )));
            }
            if let Some(m) = v[i][atom].iter().find(|m| m.shape() != (dim_s, dim_s)) {
                return Err(Error::DimensionMismatch(format!("operator of shape {:?}", m.shape())));
            }
        }
    }
    if let Some(atom) = (0..atoms).find(|&a| (nu.weight(a) > 0.0) != (dims[a] > 0)) {
        return Err(Error::UnsupportedMeasure(format!(
            "block size at `{}` does not match the base measure",
            space.label(atom)
        )));
    }

    let dk: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &n| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();

    // φ_i and the images U(e_s ⊗ φ_i)
    let phis: Vec<ComplexVector> = (0..channels)
        .map(|i| {
            let mut phi = ComplexVector::zeros(dk);
            for atom in 0..atoms {
                let w = nu.weight(atom).sqrt();
                for (n, z) in q[i][atom].iter().enumerate() {
                    phi[offsets[atom] + n] = z * w;
                }
            }
            phi
        })
        .collect();
    let gram = ComplexMatrix::from_fn(channels, channels, |a, b| phis[a].dotc(&phis[b]));
    let deviation = max_abs(&(gram - identity(channels)));
    if deviation > tol.identity {
        return Err(Error::NotOrthonormal(format!("scalar family deviates by {deviation:.3e}")));
    }

    let mut inputs = ComplexMatrix::zeros(dim_s * dk, dim_s * channels);
    let mut outputs = ComplexMatrix::zeros(dim_s * dk, dim_s * channels);
    for i in 0..channels {
        let block = product_inputs(dim_s, &phis[i]);
        inputs.columns_mut(i * dim_s, dim_s).copy_from(&block);
        let terms: Vec<(ComplexMatrix, ComplexVector)> = (0..atoms)
            .flat_map(|atom| {
                let w = nu.weight(atom).sqrt();
                (0..dims[atom]).map(move |n| (atom, n, w))
            })
            .map(|(atom, n, w)| (&v[i][atom][n] * (q[i][atom][n] * w), basis(dk, offsets[atom] + n)))
            .collect();
        outputs.columns_mut(i * dim_s, dim_s).copy_from(&entangled_outputs(dim_s, &terms));
    }
    let deviation = isometry_deviation(&outputs);
    if deviation > tol.identity {
        return Err(Error::NotOrthonormal(format!("operator family deviates by {deviation:.3e}")));
    }

    let state: ComplexMatrix = phis
        .iter()
        .zip(beta)
        .map(|(phi, &b)| outer(phi, phi) * Complex64::new(b, 0.0))
        .sum();
    let projections = (0..atoms)
        .map(|atom| {
            let mut p = ComplexMatrix::zeros(dk, dk);
            for n in 0..dims[atom] {
                p[(offsets[atom] + n, offsets[atom] + n)] = Complex64::new(1.0, 0.0);
            }
            p
        })
        .collect();
    StatisticalRealization::new(
        dim_s,
        DensityOperator::new(state)?,
        ProjectionValuedMeasure::new(space.clone(), projections)?,
        unitary_mapping(&inputs, &outputs, 1e-8)?,
    )
}
