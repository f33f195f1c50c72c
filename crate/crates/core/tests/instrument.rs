use qsa_core::fixtures::{self, basis_vector};
use qsa_core::instrument::{instruments_equal, von_neumann_instrument, KrausInstrument};
use qsa_core::qcore::{identity, max_abs_diff, r, DensityOperator, OutcomeSpace};
use qsa_core::{Error, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn projective_statistics_and_jumps() {
    let t = fixtures::fix_z();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let psi = fixtures::random_state(&mut rng, 2);
        let rho = DensityOperator::pure(&psi).unwrap();
        let dist = t.outcome_distribution(&rho).unwrap();
        let family = t.posterior_family(&rho).unwrap();
        for (j, p) in fixtures::z_projections().iter().enumerate() {
            let expected = (p * &psi).norm_squared();
            assert!((dist.weight(j) - expected).abs() < 1e-12);
            let post = family.posterior(j).unwrap();
            assert!(max_abs_diff(post.matrix(), p) < 1e-12);
        }
    }
}

#[test]
fn zero_probability_atoms_have_no_posterior() {
    let family = fixtures::fix_z().posterior_family(&DensityOperator::pure(&basis_vector(2, 0)).unwrap()).unwrap();
    assert!(family.posterior(1).is_none());
    assert_eq!(family.probability(1), 0.0);
    assert!(matches!(family.conditional(&[1]), Err(Error::ZeroProbabilityEvent(_))));
}

#[test]
fn incomplete_instrument_fails_validation() {
    let ad = fixtures::fix_ad();
    let partial = KrausInstrument::new(ad.space().clone(), 2, vec![ad.kraus(0).to_vec(), vec![]]).unwrap();
    let report = partial.validate(&Tolerances::default());
    assert!(!report.passed);
    assert!((report.completeness_deviation - 0.5).abs() < 1e-12);
}

#[test]
fn repeated_damping_composes_probabilities() {
    let ad = fixtures::fix_ad();
    let twice = ad.sequential_compose(&ad).unwrap();
    assert_eq!(twice.space().len(), 4);
    let rho = DensityOperator::pure(&basis_vector(2, 1)).unwrap();
    let dist = twice.outcome_distribution(&rho).unwrap();
    let expected = [0.25, 0.25, 0.5, 0.0];
    for (atom, e) in expected.iter().enumerate() {
        assert!((dist.weight(atom) - e).abs() < 1e-12, "{}", twice.space().label(atom));
    }
}

#[test]
fn projective_round_trip_through_pov_measure() {
    let space = OutcomeSpace::indexed(2).unwrap();
    let t = von_neumann_instrument(space, fixtures::z_projections()).unwrap();
    for (j, p) in fixtures::z_projections().iter().enumerate() {
        assert!(max_abs_diff(t.pov_measure().element(j), p) <= 1e-12);
    }
}

#[test]
fn kraus_gauge_does_not_change_equality() {
    let s = r(std::f64::consts::FRAC_1_SQRT_2);
    let p = fixtures::z_projections();
    let space = OutcomeSpace::new(["all"]).unwrap();
    let dephasing = KrausInstrument::new(space.clone(), 2, vec![p.clone()]).unwrap();
    let rotated = KrausInstrument::new(
        space,
        2,
        vec![vec![(&p[0] + &p[1]) * s, (&p[0] - &p[1]) * s]],
    )
    .unwrap();
    assert!(instruments_equal(&dephasing, &rotated, 1e-12).unwrap());
    let untouched = KrausInstrument::new(dephasing.space().clone(), 2, vec![vec![identity(2)]]).unwrap();
    assert!(!instruments_equal(&dephasing, &untouched, 1e-6).unwrap());
}

#[test]
fn prior_state_of_projective_measurement_dephases() {
    let rho = fixtures::psi_plus_density();
    let prior = fixtures::fix_z().posterior_family(&rho).unwrap().prior().unwrap();
    assert!(max_abs_diff(prior.matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-12);
}
