//! Property tests driven by seeded random fixtures.

use num_complex::Complex64;
use proptest::prelude::*;
use qsa_core::fixtures;
use qsa_core::qcore::{
    complete_to_unitary, isometry_deviation, max_abs_diff, min_eigenvalue, partial_expectation,
    spectral_decompose, tensor_product, ComplexMatrix,
};
use qsa_core::qsa::{joint_by_channel, joint_by_outcome, output_law, posterior_mixture, verify_model, MeasurementModel};
use qsa_core::realization::{
    canonicalize, dilate, extract_vq, instrument_of, invariants, DilationMode,
};
use qsa_core::stochrep::{
    apply_transform, factorize, from_realization, split_channels, sr_invariants, Factorization,
};
use qsa_core::Tolerances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_expectation_is_dual_to_tensoring(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ds, dk) = (r.random_range(1..=4), r.random_range(1..=4));
        let q = fixtures::random_matrix(&mut r, ds * dk, ds * dk);
        let s = fixtures::random_density(&mut r, dk);
        let rho = fixtures::random_density(&mut r, ds);
        let lhs = (rho.matrix() * partial_expectation(&q, &s).unwrap()).trace();
        let rhs = (tensor_product(rho.matrix(), s.matrix()) * &q).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-9);

        let g = fixtures::random_matrix(&mut r, ds * dk, ds * dk);
        let positive = &g * g.adjoint();
        prop_assert!(min_eigenvalue(&partial_expectation(&positive, &s).unwrap()) >= -1e-9);
    }

    #[test]
    fn spectral_decomposition_reconstructs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=8);
        let h = fixtures::random_hermitian(&mut r, dim);
        let clusters = spectral_decompose(&h, 1e-8).unwrap();
        let mut rebuilt = ComplexMatrix::zeros(dim, dim);
        for c in &clusters {
            prop_assert!(isometry_deviation(&c.vectors) <= 1e-10);
            rebuilt += c.projection() * Complex64::new(c.value, 0.0);
        }
        prop_assert!(max_abs_diff(&rebuilt, &h) <= 1e-9);
    }

    #[test]
    fn completion_keeps_input_columns(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..=5);
        let cols = r.random_range(1..=dim);
        let u = fixtures::random_unitary(&mut r, dim);
        let block = u.matrix().columns(0, cols).into_owned();
        let full = complete_to_unitary(&block, 1e-9).unwrap();
        prop_assert!(isometry_deviation(full.matrix()) <= 1e-10);
        prop_assert_eq!(full.matrix().columns(0, cols).into_owned(), block);
    }

    #[test]
    fn instruments_are_normalized_and_dual(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = fixtures::random_instrument(&mut r);
        let tol = Tolerances::default();
        prop_assert!(t.validate(&tol).passed);

        let rho = fixtures::random_density(&mut r, t.dim());
        let z = fixtures::random_matrix(&mut r, t.dim(), t.dim());
        let atoms: Vec<usize> = (0..t.space().len()).filter(|_| r.random_bool(0.6)).collect();
        if !atoms.is_empty() {
            let lhs = (rho.matrix() * t.apply(&atoms, &z).unwrap()).trace();
            let rhs = (t.predual_apply(&atoms, &rho).unwrap() * &z).trace();
            prop_assert!((lhs - rhs).norm() <= 1e-9);
        }

        let family = t.posterior_family(&rho).unwrap();
        let prior = t.predual_apply(&(0..t.space().len()).collect::<Vec<_>>(), &rho).unwrap();
        prop_assert!(max_abs_diff(&family.mixture(), &prior) <= 1e-9);
    }

    #[test]
    fn sequential_composition_marginals(seed in any::<u64>()) {
        let mut r = rng(seed);
        let first = fixtures::random_instrument(&mut r);
        let counts: Vec<usize> = (0..r.random_range(1..=3)).map(|_| r.random_range(1..=2)).collect();
        let second = fixtures::random_instrument_with(&mut r, first.dim(), &counts);
        let both = first.sequential_compose(&second).unwrap();
        prop_assert!(both.validate(&Tolerances::default()).passed);

        let rho = fixtures::random_density(&mut r, first.dim());
        let joint = both.outcome_distribution(&rho).unwrap();
        let marginal = first.outcome_distribution(&rho).unwrap();
        let n2 = second.space().len();
        for a in 0..first.space().len() {
            let summed: f64 = (0..n2).map(|b| joint.weight(a * n2 + b)).sum();
            prop_assert!((summed - marginal.weight(a)).abs() <= 1e-9);
        }
    }

    #[test]
    fn dilation_round_trip_and_table_orthonormality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = fixtures::random_instrument(&mut r);
        for mode in [DilationMode::Minimal, DilationMode::Invariant] {
            let g = dilate(&t, mode).unwrap();
            prop_assert!(instrument_of(&g).unwrap().equals(&t, 1e-9).unwrap());
            let vq = extract_vq(&g, &canonicalize(&g, None).unwrap(), &Tolerances::default()).unwrap();
            prop_assert!(vq.operator_orthonormality_deviation() <= 1e-9);
            prop_assert!(vq.scalar_orthonormality_deviation() <= 1e-9);
        }
    }

    #[test]
    fn unitary_equivalence_keeps_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = fixtures::random_realization(&mut r);
        let w = fixtures::random_unitary(&mut r, g.dim_k());
        let h = g.apply_unitary_equivalence(&w, r.random_range(0.0..6.3)).unwrap();
        let cmp = invariants(&g).unwrap().compare(&invariants(&h).unwrap(), &Tolerances::default());
        prop_assert!(cmp.passed, "{:?}", cmp);
    }

    #[test]
    fn gauge_transforms_keep_instrument_and_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sr = from_realization(&fixtures::random_realization(&mut r)).unwrap();
        let tol = Tolerances::default();

        let narrow = apply_transform(&sr, &fixtures::random_transform(&mut r, &sr, false)).unwrap();
        prop_assert!(narrow.instrument().equals(&sr.instrument(), 1e-9).unwrap());
        let cmp = sr_invariants(&sr).compare(&sr_invariants(&narrow), &tol);
        prop_assert!(cmp.passed, "{:?}", cmp);

        let wide = apply_transform(&sr, &fixtures::random_transform(&mut r, &sr, true)).unwrap();
        prop_assert!(wide.instrument().equals(&sr.instrument(), 1e-9).unwrap());
        let (scalar, operator) = wide.orthonormality_deviations();
        prop_assert!(scalar <= 1e-9 && operator <= 1e-9);
    }

    #[test]
    fn densities_match_channel_measures(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sr = from_realization(&fixtures::random_realization(&mut r)).unwrap();
        let inv = sr_invariants(&sr);
        prop_assert!(inv.consistency_deviation() <= 1e-10);
        prop_assert!(inv.densities.orthonormality_deviation() <= 1e-9);
        prop_assert!(inv.densities.min_diagonal() >= -1e-12);
    }

    #[test]
    fn factorization_is_sound_and_gauge_stable(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = fixtures::random_rank_one_realization(&mut r);
        let sr = split_channels(&from_realization(&g).unwrap()).unwrap();
        let tol = Tolerances::default();
        let Factorization::Factorized { qsr, .. } = factorize(&sr, &tol).unwrap() else {
            return Err(TestCaseError::fail("rank-one fixture did not factorize"));
        };
        prop_assert!(qsr.instrument().equals(&sr.instrument(), 1e-8).unwrap());

        let moved = apply_transform(&sr, &fixtures::random_transform(&mut r, &sr, false)).unwrap();
        let again = factorize(&moved, &tol).unwrap();
        let again = again.qsr().expect("transformed fixture factorizes");
        for (a, b) in qsr.pi_table().iter().flatten().zip(again.pi_table().iter().flatten()) {
            prop_assert!(max_abs_diff(a, b) <= 1e-8);
        }
    }

    #[test]
    fn model_identities_hold(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = fixtures::random_rank_one_realization(&mut r);
        let sr = split_channels(&from_realization(&g).unwrap()).unwrap();
        let tol = Tolerances::default();
        let qsr = factorize(&sr, &tol).unwrap().qsr().unwrap().clone();
        let psi = fixtures::random_state(&mut r, qsr.dim_s());
        let model = MeasurementModel::pure(qsr.clone(), psi.clone(), &tol).unwrap();
        let report = verify_model(&model, &tol);
        prop_assert!(report.passed, "{:?}", report);

        let law = output_law(&model).unwrap();
        prop_assert!(law.consistency_deviation() <= 1e-9);
        let a = joint_by_outcome(&model, &tol).unwrap();
        let b = joint_by_channel(&model).unwrap();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }

        let rho = fixtures::random_density(&mut r, qsr.dim_s());
        let family = qsr.instrument().posterior_family(&rho).unwrap();
        for atom in 0..qsr.space().len() {
            if let Some(expected) = family.posterior(atom) {
                let post = posterior_mixture(&qsr, atom, &rho, &tol).unwrap();
                prop_assert!(max_abs_diff(post.matrix(), expected.matrix()) <= 1e-9);
            }
        }
    }
}
