//! Reference instruments and random generators used by the test suites and
//! the command-line examples.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::instrument::{von_neumann_instrument, KrausInstrument};
use crate::realization::StatisticalRealization;
use crate::stochrep::{StochasticRealization, Transform};
use crate::qcore::{
    c, r, ComplexMatrix, ComplexVector, DensityOperator, OutcomeSpace, ProjectionValuedMeasure,
    UnitaryOperator,
};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `P₊ = |0⟩⟨0|`, `P₋ = |1⟩⟨1|`.
pub fn z_projections() -> Vec<ComplexMatrix> {
    vec![
        ComplexMatrix::from_row_slice(2, 2, &[r(1.), r(0.), r(0.), r(0.)]),
        ComplexMatrix::from_row_slice(2, 2, &[r(0.), r(0.), r(0.), r(1.)]),
    ]
}

pub fn z_space() -> OutcomeSpace {
    OutcomeSpace::new(["+1", "-1"]).expect("distinct labels")
}

/// Projective measurement of σ_z with outcomes `+1`, `-1`.
pub fn fix_z() -> KrausInstrument {
    fix_z_relabelled(z_space())
}

/// The σ_z measurement over any two-atom outcome space.
pub fn fix_z_relabelled(space: OutcomeSpace) -> KrausInstrument {
    von_neumann_instrument(space, z_projections()).expect("valid projections")
}

/// Amplitude damping with γ = 0.5, outcomes `0`, `1`.
pub fn fix_ad() -> KrausInstrument {
    let s = r(0.5f64.sqrt());
    let a0 = ComplexMatrix::from_row_slice(2, 2, &[r(1.), r(0.), r(0.), s]);
    let a1 = ComplexMatrix::from_row_slice(2, 2, &[r(0.), s, r(0.), r(0.)]);
    KrausInstrument::new(OutcomeSpace::indexed(2).expect("labels"), 2, vec![vec![a0], vec![a1]])
        .expect("well-formed")
}

pub fn hadamard() -> ComplexMatrix {
    let h = r(FRAC_1_SQRT_2);
    ComplexMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Single-outcome instrument with the Hadamard gate as its only Kraus operator.
pub fn fix_iso() -> KrausInstrument {
    KrausInstrument::new(OutcomeSpace::new(["w0"]).expect("label"), 2, vec![vec![hadamard()]])
        .expect("well-formed")
}

/// `(|0⟩ + |1⟩)/√2`.
pub fn psi_plus() -> ComplexVector {
    ComplexVector::from_vec(vec![r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2)])
}

pub fn psi_plus_density() -> DensityOperator {
    DensityOperator::pure(&psi_plus()).expect("unit vector")
}

pub fn basis_vector(dim: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[index] = r(1.0);
    v
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_matrix(rng, dim, dim);
    (&g + g.adjoint()) * r(0.5)
}

/// Random unit vector from a normalized complex Gaussian.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / r(n)
}

/// Random density operator of the given rank.
pub fn random_density_of_rank<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    rank: usize,
) -> DensityOperator {
    let g = random_matrix(rng, dim, rank.max(1));
    DensityOperator::normalized(&(&g * g.adjoint())).expect("positive with non-zero trace")
}

pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    random_density_of_rank(rng, dim, dim)
}

/// Unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> UnitaryOperator {
    let q = random_matrix(rng, dim, dim).qr().q();
    UnitaryOperator::with_tol(q, 1e-10).expect("QR factor is unitary")
}

/// `m^{-1/2}` for a positive definite `m`.
pub(crate) fn inverse_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let eig = ((m + m.adjoint()) * r(0.5)).symmetric_eigen();
    let inv = eig.eigenvalues.map(|l| r(1.0 / l.sqrt()));
    &eig.eigenvectors * ComplexMatrix::from_diagonal(&inv) * eig.eigenvectors.adjoint()
}

/// Random normalized instrument with `dim` levels and `kraus_counts[ω]`
/// Kraus operators at atom ω. Gaussian Kraus operators `G` are normalized
/// as `G (Σ G†G)^{-1/2}`.
pub fn random_instrument_with<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    kraus_counts: &[usize],
) -> KrausInstrument {
    let raw: Vec<Vec<ComplexMatrix>> = kraus_counts
        .iter()
        .map(|&m| (0..m).map(|_| random_matrix(rng, dim, dim)).collect())
        .collect();
    let total = raw
        .iter()
        .flatten()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, g| acc + g.adjoint() * g);
    let norm = inverse_sqrt(&total);
    let kraus = raw
        .into_iter()
        .map(|list| list.into_iter().map(|g| g * &norm).collect())
        .collect();
    KrausInstrument::new(
        OutcomeSpace::indexed(kraus_counts.len()).expect("labels"),
        dim,
        kraus,
    )
    .expect("well-formed")
}

/// Random instrument with `d_S ≤ 3`, at most 3 atoms and at most 2 Kraus
/// operators per atom; every atom carries at least one Kraus operator.
pub fn random_instrument<R: Rng + ?Sized>(rng: &mut R) -> KrausInstrument {
    let dim = rng.random_range(1..=3);
    let atoms = rng.random_range(1..=3);
    let counts: Vec<usize> = (0..atoms).map(|_| rng.random_range(1..=2)).collect();
    random_instrument_with(rng, dim, &counts)
}

/// Random realization with `d_S ≤ 3`, `d_K ≤ 4`, at most 3 atoms (possibly
/// empty), a random-rank ancilla state and a random coupling unitary.
pub fn random_realization<R: Rng + ?Sized>(rng: &mut R) -> StatisticalRealization {
    let dim_s = rng.random_range(1..=3);
    let dim_k = rng.random_range(1..=4);
    let atoms = rng.random_range(1..=3);
    let w = random_unitary(rng, dim_k);
    let mut projections = vec![ComplexMatrix::zeros(dim_k, dim_k); atoms];
    for j in 0..dim_k {
        let col = w.matrix().column(j).into_owned();
        projections[rng.random_range(0..atoms)] += &col * col.adjoint();
    }
    let rank = rng.random_range(1..=dim_k);
    StatisticalRealization::new(
        dim_s,
        random_density_of_rank(rng, dim_k, rank),
        ProjectionValuedMeasure::with_tol(
            OutcomeSpace::indexed(atoms).expect("labels"),
            projections,
            &crate::Tolerances::with_identity(1e-8),
        )
        .expect("rotated coordinate projections"),
        random_unitary(rng, dim_s * dim_k),
    )
    .expect("consistent dimensions")
}

/// Random realization whose PVM splits a rotated basis of `K` into `d_K`
/// rank-one atoms, with `d_S ≤ 3`, `d_K ≤ 4` and a random-rank ancilla state.
pub fn random_rank_one_realization<R: Rng + ?Sized>(rng: &mut R) -> StatisticalRealization {
    let dim_s = rng.random_range(1..=3);
    let dim_k = rng.random_range(1..=4);
    let w = random_unitary(rng, dim_k);
    let projections = (0..dim_k)
        .map(|j| {
            let col = w.matrix().column(j).into_owned();
            &col * col.adjoint()
        })
        .collect();
    let rank = rng.random_range(1..=dim_k);
    StatisticalRealization::new(
        dim_s,
        random_density_of_rank(rng, dim_k, rank),
        ProjectionValuedMeasure::with_tol(
            OutcomeSpace::indexed(dim_k).expect("labels"),
            projections,
            &crate::Tolerances::with_identity(1e-8),
        )
        .expect("rotated rank-one projections"),
        random_unitary(rng, dim_s * dim_k),
    )
    .expect("consistent dimensions")
}

/// Random gauge transform for `sr`: Haar-like unitaries on every block and
/// channel, a random phase and, when `independent` is set, a second
/// independent pair acting on the operator table only.
pub fn random_transform<R: Rng + ?Sized>(
    rng: &mut R,
    sr: &StochasticRealization,
    independent: bool,
) -> Transform {
    let family = |rng: &mut R| -> (Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
        let z = sr.dims().iter().map(|&n| random_unitary_or_empty(rng, n)).collect();
        let j = sr.channels().iter().map(|&(_, k)| random_unitary_or_empty(rng, k)).collect();
        (z, j)
    };
    let (z, j) = family(rng);
    let independent = independent.then(|| family(rng));
    Transform {
        z,
        j,
        phase: rng.random_range(0.0..std::f64::consts::TAU),
        new_base: None,
        independent,
    }
}

fn random_unitary_or_empty<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    if dim == 0 {
        ComplexMatrix::zeros(0, 0)
    } else {
        random_unitary(rng, dim).matrix().clone()
    }
}
