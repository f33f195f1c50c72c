use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{DensityOperator, UnitaryOperator};
use crate::Tolerances;

/// Dense complex matrix. Row index first, column index second.
pub type ComplexMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type ComplexVector = DVector<Complex64>;

/// Residual norm below which a Gram–Schmidt candidate counts as dependent.
const DEPENDENCY_TOL: f64 = 1e-6;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry-wise deviation between two equally shaped matrices.
/// Mismatched shapes count as infinitely far apart.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `‖m†m − I‖_max`.
pub fn isometry_deviation(m: &ComplexMatrix) -> f64 {
    max_abs_diff(&(m.adjoint() * m), &identity(m.ncols()))
}

/// `|u⟩⟨v|`.
pub fn outer(u: &ComplexVector, v: &ComplexVector) -> ComplexMatrix {
    u * v.adjoint()
}

/// Row-major vectorization: entry `(a, b)` lands at `a·cols + b`.
pub fn vectorize(m: &ComplexMatrix) -> ComplexVector {
    let cols = m.ncols();
    ComplexVector::from_fn(m.nrows() * cols, |idx, _| m[(idx / cols, idx % cols)])
}

/// Frobenius inner product `tr[a† b]`.
pub fn frobenius_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Multiplies the matrix by a phase so that its largest-modulus entry is
/// real and positive. Ties go to the first entry in row-major order.
/// Returns the phased matrix and the unit factor that was applied.
pub fn fix_phase(m: &ComplexMatrix) -> (ComplexMatrix, Complex64) {
    let mut best = Complex64::new(0.0, 0.0);
    let mut best_norm = 0.0;
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let z = m[(row, col)];
            // strict comparison keeps the first maximum
            if z.norm() > best_norm * (1.0 + 1e-12) {
                best = z;
                best_norm = z.norm();
            }
        }
    }
    if best_norm == 0.0 {
        return (m.clone(), Complex64::new(1.0, 0.0));
    }
    let factor = best.conj() / best_norm;
    (m * factor, factor)
}

/// Kronecker product with system-major index convention:
/// row index `i_a·rows(b) + i_b`, column index likewise.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Partial expectation `E_s[q]` of an operator on `H_S ⊗ K` with respect to
/// a state `s` on `K`: the unique operator on `H_S` with
/// `tr[ρ E_s[q]] = tr[(ρ ⊗ s) q]` for every `ρ`.
pub fn partial_expectation(q: &ComplexMatrix, s: &DensityOperator) -> Result<ComplexMatrix> {
    partial_expectation_op(q, s.matrix())
}

/// [`partial_expectation`] against an arbitrary ancilla operator.
pub fn partial_expectation_op(q: &ComplexMatrix, s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dk = s.nrows();
    if s.ncols() != dk || dk == 0 {
        return Err(Error::DimensionMismatch(format!(
            "ancilla operator is {}x{}, expected square",
            s.nrows(),
            s.ncols()
        )));
    }
    if q.nrows() != q.ncols() || !q.nrows().is_multiple_of(dk) {
        return Err(Error::DimensionMismatch(format!(
            "operator of size {}x{} does not factor over an ancilla of dimension {dk}",
            q.nrows(),
            q.ncols()
        )));
    }
    let ds = q.nrows() / dk;
    // E[a,b] = Σ_{k,l} q[(a,k),(b,l)] s[l,k]
    Ok(ComplexMatrix::from_fn(ds, ds, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..dk {
            for l in 0..dk {
                acc += q[(a * dk + k, b * dk + l)] * s[(l, k)];
            }
        }
        acc
    }))
}

/// One eigenvalue cluster of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct SpectralCluster {
    /// Mean of the merged eigenvalues.
    pub value: f64,
    pub multiplicity: usize,
    /// Orthonormal eigenvectors as columns (`dim × multiplicity`).
    pub vectors: ComplexMatrix,
}

impl SpectralCluster {
    /// Spectral projection onto this cluster.
    pub fn projection(&self) -> ComplexMatrix {
        &self.vectors * self.vectors.adjoint()
    }
}

/// Spectral decomposition with eigenvalue clustering, sorted by descending
/// eigenvalue. Eigenvalues within `cluster_tol` of their neighbour are
/// merged into one cluster sharing an orthonormal eigenbasis.
pub fn spectral_decompose(h: &ComplexMatrix, cluster_tol: f64) -> Result<Vec<SpectralCluster>> {
    spectral_decompose_with(h, cluster_tol, Tolerances::default().identity)
}

/// [`spectral_decompose`] with an explicit hermiticity tolerance.
pub fn spectral_decompose_with(
    h: &ComplexMatrix,
    cluster_tol: f64,
    hermitian_tol: f64,
) -> Result<Vec<SpectralCluster>> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "spectral decomposition needs a non-empty square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if !all_finite(h) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_deviation(h);
    if deviation > hermitian_tol {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        let value = eig.eigenvalues[idx];
        match groups.last_mut() {
            Some(group) if (eig.eigenvalues[*group.last().unwrap()] - value).abs() <= cluster_tol => {
                group.push(idx)
            }
            _ => groups.push(vec![idx]),
        }
    }
    Ok(groups
        .into_iter()
        .map(|group| {
            let value = group.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / group.len() as f64;
            let mut vectors = ComplexMatrix::from_fn(h.nrows(), group.len(), |row, col| {
                eig.eigenvectors[(row, group[col])]
            });
            for mut col in vectors.column_iter_mut() {
                let (fixed, _) = fix_phase(&ComplexMatrix::from_iterator(col.len(), 1, col.iter().cloned()));
                col.copy_from(&fixed.column(0));
            }
            SpectralCluster {
                value,
                multiplicity: group.len(),
                vectors,
            }
        })
        .collect())
}

/// Smallest eigenvalue of a Hermitian matrix (Hermitian part is used).
pub fn min_eigenvalue(h: &ComplexMatrix) -> f64 {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Extends an isometric block of columns to a unitary.
///
/// The first `r` columns of the result are the input columns, copied
/// verbatim. The remaining columns come from Gram–Schmidt against the
/// standard basis scanned in index order, skipping candidates whose residual
/// falls below a fixed dependency threshold.
pub fn complete_to_unitary(columns: &ComplexMatrix, tol: f64) -> Result<UnitaryOperator> {
    let (d, r) = columns.shape();
    if r > d || d == 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot complete {r} columns of length {d} to a unitary"
        )));
    }
    if !all_finite(columns) {
        return Err(Error::NonFinite);
    }
    let deviation = isometry_deviation(columns);
    if deviation > tol {
        return Err(Error::NotIsometric { deviation });
    }
    let mut basis: Vec<ComplexVector> = (0..r).map(|j| columns.column(j).into_owned()).collect();
    let residual = |basis: &[ComplexVector], j: usize| {
        let mut v = ComplexVector::zeros(d);
        v[j] = Complex64::new(1.0, 0.0);
        // two passes keep the completion orthonormal to working precision
        for _ in 0..2 {
            for u in basis {
                let proj = u.dotc(&v);
                v -= u * proj;
            }
        }
        v
    };
    let mut used = vec![false; d];
    for j in 0..d {
        if basis.len() == d {
            break;
        }
        let v = residual(&basis, j);
        let norm = v.norm();
        if norm > DEPENDENCY_TOL {
            basis.push(v / Complex64::new(norm, 0.0));
            used[j] = true;
        }
    }
    // near-dependent skips can leave the basis short; take the best leftovers
    while basis.len() < d {
        let (j, v) = (0..d)
            .filter(|&j| !used[j])
            .map(|j| (j, residual(&basis, j)))
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("standard basis spans the space");
        let norm = v.norm();
        basis.push(v / Complex64::new(norm, 0.0));
        used[j] = true;
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for (j, v) in basis.iter().enumerate() {
        out.set_column(j, v);
    }
    out.view_mut((0, 0), (d, r)).copy_from(columns);
    UnitaryOperator::with_tol(out, tol.max(1e-10))
}

/// Unitary `U` with `U·inputs[:, j] = outputs[:, j]` for every column `j`.
///
/// Both column blocks must be isometric and of equal shape. The unitary is
/// assembled from the deterministic completions of both blocks.
pub fn unitary_mapping(
    inputs: &ComplexMatrix,
    outputs: &ComplexMatrix,
    tol: f64,
) -> Result<UnitaryOperator> {
    if inputs.shape() != outputs.shape() {
        return Err(Error::DimensionMismatch(format!(
            "input block {:?} and output block {:?} differ",
            inputs.shape(),
            outputs.shape()
        )));
    }
    let a = complete_to_unitary(inputs, tol)?;
    let b = complete_to_unitary(outputs, tol)?;
    UnitaryOperator::with_tol(b.matrix() * a.matrix().adjoint(), tol.max(1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hadamard() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_row_slice(2, 2, &[r(s), r(s), r(s), r(-s)])
    }

    #[test]
    fn kronecker_identity_and_swap_blocks() {
        assert_eq!(tensor_product(&identity(2), &identity(2)), identity(4));
        let x = ComplexMatrix::from_row_slice(2, 2, &[r(0.), r(1.), r(1.), r(0.)]);
        let swap = tensor_product(&x, &identity(2));
        let mut expected = ComplexMatrix::zeros(4, 4);
        expected[(0, 2)] = r(1.);
        expected[(1, 3)] = r(1.);
        expected[(2, 0)] = r(1.);
        expected[(3, 1)] = r(1.);
        assert_eq!(swap, expected);
    }

    #[test]
    fn kronecker_of_hadamards() {
        let hh = tensor_product(&hadamard(), &hadamard());
        assert!((hh[(0, 0)] - r(0.5)).norm() < 1e-15);
        assert!((hh[(3, 3)] - r(0.5)).norm() < 1e-15);
        assert!((hh[(1, 1)] - r(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn partial_expectation_of_products() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[r(1.), c(0., 2.), r(3.), r(-1.)]);
        let b = ComplexMatrix::from_row_slice(2, 2, &[r(0.2), c(0.1, 0.3), c(0.1, -0.3), r(0.5)]);
        let s = DensityOperator::new(ComplexMatrix::from_row_slice(
            2,
            2,
            &[r(0.25), c(0.1, 0.1), c(0.1, -0.1), r(0.75)],
        ))
        .unwrap();
        let e = partial_expectation(&tensor_product(&a, &b), &s).unwrap();
        let factor = (s.matrix() * &b).trace();
        assert!(max_abs_diff(&e, &(a.clone() * factor)) < 1e-14);

        let eta = ComplexVector::from_vec(vec![r(0.6), c(0., 0.8)]);
        let proj = outer(&eta, &eta);
        let s = DensityOperator::new(proj.clone()).unwrap();
        let e = partial_expectation(&tensor_product(&a, &proj), &s).unwrap();
        assert!(max_abs_diff(&e, &a) < 1e-14);

        let e = partial_expectation(&identity(6), &DensityOperator::maximally_mixed(3)).unwrap();
        assert!(max_abs_diff(&e, &identity(2)) < 1e-14);
    }

    #[test]
    fn partial_expectation_rejects_bad_dims() {
        let s = DensityOperator::maximally_mixed(3);
        assert!(matches!(
            partial_expectation(&identity(4), &s),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn spectral_examples() {
        let h = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![r(0.5), r(0.5)]));
        let sd = spectral_decompose(&h, 1e-8).unwrap();
        assert_eq!(sd.len(), 1);
        assert_eq!(sd[0].multiplicity, 2);
        assert!((sd[0].value - 0.5).abs() < 1e-15);

        let h = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![r(0.3), r(0.7)]));
        let sd = spectral_decompose(&h, 1e-8).unwrap();
        assert_eq!(sd.len(), 2);
        assert!((sd[0].value - 0.7).abs() < 1e-15 && sd[0].multiplicity == 1);
        assert!((sd[1].value - 0.3).abs() < 1e-15 && sd[1].multiplicity == 1);

        let eta = ComplexVector::from_vec(vec![r(0.6), c(0., 0.8), r(0.)]);
        let sd = spectral_decompose(&outer(&eta, &eta), 1e-8).unwrap();
        assert_eq!(sd.len(), 2);
        assert!((sd[0].value - 1.0).abs() < 1e-12 && sd[0].multiplicity == 1);
        assert!(sd[1].value.abs() < 1e-12 && sd[1].multiplicity == 2);
    }

    #[test]
    fn spectral_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[r(1.), r(1.), r(0.), r(1.)]);
        assert!(matches!(
            spectral_decompose(&m, 1e-8),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn completion_examples() {
        let h = hadamard();
        let u = complete_to_unitary(&h, 1e-9).unwrap();
        assert_eq!(u.matrix(), &h);

        let mut e0 = ComplexMatrix::zeros(4, 1);
        e0[(0, 0)] = r(1.);
        let u = complete_to_unitary(&e0, 1e-9).unwrap();
        assert_eq!(u.matrix(), &identity(4));

        // e0 − ⟨u,e0⟩u = (1/2, −1/2), normalized to (1, −1)/√2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let col = ComplexMatrix::from_column_slice(2, 1, &[r(s), r(s)]);
        let u = complete_to_unitary(&col, 1e-9).unwrap();
        assert!((u.matrix()[(0, 1)] - r(s)).norm() < 1e-15);
        assert!((u.matrix()[(1, 1)] - r(-s)).norm() < 1e-15);
    }

    #[test]
    fn completion_rejects_non_isometry() {
        let col = ComplexMatrix::from_column_slice(2, 1, &[r(1.), r(1.)]);
        assert!(matches!(
            complete_to_unitary(&col, 1e-9),
            Err(Error::NotIsometric { .. })
        ));
    }

    #[test]
    fn unitary_mapping_sends_inputs_to_outputs() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let inputs = ComplexMatrix::from_column_slice(3, 1, &[r(s), r(0.), c(0., s)]);
        let outputs = ComplexMatrix::from_column_slice(3, 1, &[r(0.), r(1.), r(0.)]);
        let u = unitary_mapping(&inputs, &outputs, 1e-9).unwrap();
        assert!(max_abs_diff(&(u.matrix() * &inputs), &outputs) < 1e-14);
    }

    #[test]
    fn phase_fixing_makes_largest_entry_positive() {
        let m = ComplexMatrix::from_row_slice(1, 3, &[r(0.1), c(0., -2.), r(2.)]);
        let (fixed, factor) = fix_phase(&m);
        assert!((factor.norm() - 1.0).abs() < 1e-15);
        assert!((fixed[(0, 1)] - r(2.)).norm() < 1e-15);
    }
}
