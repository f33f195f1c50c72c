//! Dense complex linear algebra and the operator, measure and dilation
//! primitives the rest of the crate is built on.
//!
//! Finite outcome spaces replace the general measurable setting: measures
//! are weight tables and direct integrals become direct sums of per-atom
//! blocks.

mod linalg;
mod measure;
mod operators;

pub use linalg::{
    all_finite, c, complete_to_unitary, fix_phase, frobenius_inner, hermiticity_deviation,
    identity, isometry_deviation, max_abs, max_abs_diff, min_eigenvalue, outer,
    partial_expectation, partial_expectation_op, r, spectral_decompose, spectral_decompose_with,
    tensor_product, unitary_mapping, vectorize, ComplexMatrix, ComplexVector, SpectralCluster,
};
pub use measure::{
    radon_nikodym, AtomicMeasure, ComplexMeasure, FiniteMeasure, OutcomeSpace,
    ProjectionValuedMeasure,
};
pub use operators::{DensityOperator, UnitaryOperator};
