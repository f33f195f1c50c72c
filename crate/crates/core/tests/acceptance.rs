//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; the process exits non-zero when any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qsa_core::fixtures::{self, basis_vector, psi_plus};
use qsa_core::instrument::KrausInstrument;
use qsa_core::qcore::{max_abs_diff, ComplexMatrix, ComplexVector, DensityOperator, FiniteMeasure};
use qsa_core::qsa::{
    output_law, posterior_mixture, run_trajectory, run_trajectory_seeded, sample_shot, seeded_rng,
    verify_model, MeasurementModel, ShotResult,
};
use qsa_core::realization::{canonicalize, dilate, extract_vq, instrument_of, invariants, von_neumann_process, DilationMode};
use qsa_core::stochrep::{
    apply_transform, factorize, from_realization, split_channels, qsr_from_instrument, qsr_instrument,
    sr_invariants, Factorization, QuantumStochasticRep, StochasticRealization,
};
use qsa_core::Tolerances;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn check(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn run(name: &str, limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let passed = outcome.passed && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / limit {:.0?}", l));
    println!(
        "{} {name}: {} [{:.2?}{budget}]",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed
    );
    passed
}

/// `max |e^{iφ}a - b|` for the best single phase over the whole table.
fn phase_free_distance(a: &[Vec<ComplexMatrix>], b: &[Vec<ComplexMatrix>]) -> f64 {
    let overlap: Complex64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum::<Complex64>())
        .sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| max_abs_diff(&(x * phase), y))
        .fold(0.0, f64::max)
}

fn c1_von_neumann() -> Outcome {
    let g = von_neumann_process(
        fixtures::z_space(),
        fixtures::z_projections(),
        &basis_vector(2, 0),
        &[basis_vector(2, 0), basis_vector(2, 1)],
    )
    .expect("projective process");
    let t = instrument_of(&g).expect("instrument");
    let projections = fixtures::z_projections();
    let mut rng = seeded_rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let psi = fixtures::random_state(&mut rng, 2);
        let rho = DensityOperator::pure(&psi).expect("unit vector");
        let dist = t.outcome_distribution(&rho).expect("distribution");
        let family = t.posterior_family(&rho).expect("posteriors");
        for (j, p) in projections.iter().enumerate() {
            let expected = (p * &psi).norm_squared();
            worst = worst.max((dist.weight(j) - expected).abs());
            let raw = p * rho.matrix() * p;
            let oracle = &raw / raw.trace();
            match family.posterior(j) {
                Some(post) => worst = worst.max(max_abs_diff(post.matrix(), &oracle)),
                None => worst = f64::INFINITY,
            }
        }
    }
    Outcome::check(worst <= 1e-10, format!("50 states, max error {worst:.2e} (tol 1e-10)"))
}

fn corpus() -> Vec<KrausInstrument> {
    let mut rng = seeded_rng(202);
    (0..100).map(|_| fixtures::random_instrument(&mut rng)).collect()
}

fn c2_dilation(corpus: &[KrausInstrument]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for t in corpus {
        for mode in [DilationMode::Minimal, DilationMode::Invariant] {
            match dilate(t, mode).and_then(|g| instrument_of(&g)) {
                Ok(back) => {
                    let d = back.choi_distance(t);
                    worst = worst.max(d);
                    if d > 1e-9 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    Outcome::check(
        failures == 0,
        format!("{} instruments x 2 modes, max Choi distance {worst:.2e}, {failures} failures (tol 1e-9)", corpus.len()),
    )
}

fn c3_orthonormality(corpus: &[KrausInstrument]) -> Outcome {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for t in corpus {
        for mode in [DilationMode::Minimal, DilationMode::Invariant] {
            let vq = dilate(t, mode).and_then(|g| {
                let cf = canonicalize(&g, None)?;
                extract_vq(&g, &cf, &tol)
            });
            match vq {
                Ok(vq) => {
                    let d = vq.operator_orthonormality_deviation().max(vq.scalar_orthonormality_deviation());
                    worst = worst.max(d);
                    if d > 1e-9 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    Outcome::check(failures == 0, format!("max deviation {worst:.2e}, {failures} failures (tol 1e-9)"))
}

fn c4_unitary_equivalence() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = seeded_rng(404);
    let (mut worst_theta, mut worst_measure, mut worst_choi): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut failures = 0;
    for _ in 0..50 {
        let g = fixtures::random_realization(&mut rng);
        let w = fixtures::random_unitary(&mut rng, g.dim_k());
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let h = g.apply_unitary_equivalence(&w, phase).expect("equivalent realization");
        let cmp = invariants(&g).expect("invariants").compare(&invariants(&h).expect("invariants"), &tol);
        let choi = instrument_of(&g).expect("instrument").choi_distance(&instrument_of(&h).expect("instrument"));
        worst_theta = worst_theta.max(cmp.operator_deviation);
        worst_measure = worst_measure.max(cmp.measure_deviation);
        worst_choi = worst_choi.max(choi);
        if !cmp.passed || choi > 1e-9 {
            failures += 1;
        }
    }
    Outcome::check(
        failures == 0,
        format!("50 triples, Θ {worst_theta:.2e}, ν {worst_measure:.2e}, Choi {worst_choi:.2e} (tol 1e-9)"),
    )
}

fn random_base<R: Rng>(rng: &mut R, nu: &FiniteMeasure) -> FiniteMeasure {
    let weights = nu
        .weights()
        .iter()
        .map(|&w| if w > 0.0 { rng.random_range(0.2..3.0) } else { 0.0 })
        .collect();
    FiniteMeasure::new(nu.space().clone(), weights).expect("positive weights")
}

fn c5_gauge() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = seeded_rng(505);
    let (mut worst_choi, mut worst_inv): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for n in 0..50 {
        let sr = from_realization(&fixtures::random_realization(&mut rng)).expect("stochastic realization");
        let reference = sr.instrument();
        let independent = n % 2 == 1;
        let mut transform = fixtures::random_transform(&mut rng, &sr, independent);
        if n % 3 == 0 {
            transform.new_base = Some(random_base(&mut rng, sr.nu()));
        }
        let moved = match apply_transform(&sr, &transform) {
            Ok(m) => m,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let choi = moved.instrument().choi_distance(&reference);
        worst_choi = worst_choi.max(choi);
        let mut ok = choi <= 1e-9;
        if !independent {
            let cmp = sr_invariants(&sr).compare(&sr_invariants(&moved), &tol);
            worst_inv = worst_inv.max(cmp.operator_deviation.max(cmp.measure_deviation));
            ok &= cmp.passed;
        }
        if !ok {
            failures += 1;
        }
    }
    Outcome::check(
        failures == 0,
        format!("50 transforms, Choi {worst_choi:.2e}, invariants {worst_inv:.2e}, {failures} failures (tol 1e-9)"),
    )
}

fn factorizable_fixtures() -> Vec<StochasticRealization> {
    let mut rng = seeded_rng(606);
    let mut out = Vec::new();
    for _ in 0..25 {
        let dim = rng.random_range(1..=3);
        let atoms = rng.random_range(1..=3);
        let t = fixtures::random_instrument_with(&mut rng, dim, &vec![1; atoms]);
        let g = dilate(&t, DilationMode::Invariant).expect("dilation");
        out.push(from_realization(&g).expect("stochastic realization"));
    }
    for t in [fixtures::fix_z(), fixtures::fix_ad(), fixtures::fix_iso()] {
        let g = dilate(&t, DilationMode::Invariant).expect("dilation");
        out.push(from_realization(&g).expect("stochastic realization"));
    }
    for _ in 0..25 {
        let g = fixtures::random_rank_one_realization(&mut rng);
        out.push(split_channels(&from_realization(&g).expect("stochastic realization")).expect("construction"));
    }
    out
}

fn factorized(sr: &StochasticRealization, tol: &Tolerances) -> Option<QuantumStochasticRep> {
    match factorize(sr, tol) {
        Ok(Factorization::Factorized { qsr, .. }) => Some(qsr),
        _ => None,
    }
}

fn c6_factorization() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = seeded_rng(607);
    let fixtures = factorizable_fixtures();
    let (mut worst_choi, mut worst_pi): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for sr in &fixtures {
        let Some(qsr) = factorized(sr, &tol) else {
            failures += 1;
            continue;
        };
        match qsr_instrument(&qsr, &tol) {
            Ok(t) => {
                let d = t.choi_distance(&sr.instrument());
                worst_choi = worst_choi.max(d);
                if d > 1e-8 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
        let transform = fixtures::random_transform(&mut rng, sr, false);
        let Some(again) = apply_transform(sr, &transform).ok().and_then(|m| factorized(&m, &tol)) else {
            failures += 1;
            continue;
        };
        let d = phase_free_distance(qsr.pi_table(), again.pi_table());
        worst_pi = worst_pi.max(d);
        if d > 1e-8 {
            failures += 1;
        }
    }
    Outcome::check(
        failures == 0,
        format!(
            "{} fixtures, Choi {worst_choi:.2e}, Π after transform {worst_pi:.2e}, {failures} failures (tol 1e-8)",
            fixtures.len()
        ),
    )
}

fn model_corpus() -> Vec<(QuantumStochasticRep, ComplexVector)> {
    let tol = Tolerances::default();
    let mut rng = seeded_rng(707);
    let mut out = Vec::new();
    let states = [psi_plus(), basis_vector(2, 0), basis_vector(2, 1)];
    for t in [fixtures::fix_z(), fixtures::fix_ad(), fixtures::fix_iso()] {
        let qsr = qsr_from_instrument(&t, &tol).expect("dilation").qsr().expect("factorizable").clone();
        for psi in &states {
            out.push((qsr.clone(), psi.clone()));
        }
        out.push((qsr, fixtures::random_state(&mut rng, 2)));
    }
    for sr in factorizable_fixtures() {
        if let Some(qsr) = factorized(&sr, &tol) {
            let psi = fixtures::random_state(&mut rng, qsr.dim_s());
            out.push((qsr, psi));
        }
    }
    out
}

fn c7_identities() -> Outcome {
    let tol = Tolerances::with_identity(1e-9);
    let mut rng = seeded_rng(708);
    let corpus = model_corpus();
    let (mut worst_law, mut worst_post): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for (qsr, psi) in &corpus {
        let model = MeasurementModel::pure(qsr.clone(), psi.clone(), &tol).expect("model");
        if !verify_model(&model, &tol).passed {
            failures += 1;
        }
        let t = qsr.instrument();
        let rho = DensityOperator::pure(psi).expect("unit vector");
        let law = output_law(&model).expect("law");
        let dist = t.outcome_distribution(&rho).expect("distribution");
        for (atom, m) in law.total.iter().enumerate() {
            worst_law = worst_law.max((m - dist.weight(atom)).abs());
        }
        let mixed = fixtures::random_density(&mut rng, qsr.dim_s());
        for rho in [rho, mixed] {
            let family = t.posterior_family(&rho).expect("posteriors");
            for atom in 0..qsr.space().len() {
                let Some(oracle) = family.posterior(atom) else { continue };
                match posterior_mixture(qsr, atom, &rho, &tol) {
                    Ok(post) => worst_post = worst_post.max(max_abs_diff(post.matrix(), oracle.matrix())),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    let passed = failures == 0 && worst_law <= 1e-9 && worst_post <= 1e-9;
    Outcome::check(
        passed,
        format!(
            "{} models, law {worst_law:.2e}, posterior {worst_post:.2e}, {failures} failed reports (tol 1e-9)",
            corpus.len()
        ),
    )
}

/// Largest excess of `|count - n p|` over three binomial standard
/// deviations; positive means a violation.
fn binomial_excess(counts: &[usize], probabilities: &[f64], n: usize) -> f64 {
    counts
        .iter()
        .zip(probabilities)
        .map(|(&c, &p)| {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            (c as f64 - n as f64 * p).abs() - 3.0 * sigma
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn single_shot_check(t: &KrausInstrument, psi: ComplexVector, seed: u64, shots: usize) -> f64 {
    let tol = Tolerances::default();
    let qsr = qsr_from_instrument(t, &tol).expect("dilation").qsr().expect("factorizable").clone();
    let model = MeasurementModel::pure(qsr, psi.clone(), &tol).expect("model");
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0; t.space().len()];
    for _ in 0..shots {
        counts[sample_shot(&model, &mut rng).expect("shot").atom] += 1;
    }
    let dist = t.outcome_distribution(&DensityOperator::pure(&psi).expect("unit vector")).expect("distribution");
    binomial_excess(&counts, dist.weights(), shots)
}

fn two_step_check(t: &KrausInstrument, psi: ComplexVector, seed: u64, runs: usize) -> f64 {
    let tol = Tolerances::default();
    let qsr = qsr_from_instrument(t, &tol).expect("dilation").qsr().expect("factorizable").clone();
    let model = MeasurementModel::pure(qsr, psi.clone(), &tol).expect("model");
    let n = t.space().len();
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0; n * n];
    for _ in 0..runs {
        let outcomes = run_trajectory(&model, 2, &mut rng).expect("trajectory").outcomes();
        counts[outcomes[0] * n + outcomes[1]] += 1;
    }
    let oracle = t
        .sequential_compose(t)
        .expect("composition")
        .outcome_distribution(&DensityOperator::pure(&psi).expect("unit vector"))
        .expect("distribution");
    binomial_excess(&counts, oracle.weights(), runs)
}

fn shot_bits(s: &ShotResult) -> Vec<u64> {
    let mut bits = vec![s.atom as u64, s.channel as u64, s.probability.to_bits(), s.weight.to_bits()];
    bits.extend(s.state.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]));
    bits
}

fn c8_sampler() -> Outcome {
    const SHOTS: usize = 100_000;
    let z_excess = single_shot_check(&fixtures::fix_z(), psi_plus(), 801, SHOTS);
    let ad_excess = single_shot_check(&fixtures::fix_ad(), basis_vector(2, 1), 802, SHOTS);
    let z_two = two_step_check(&fixtures::fix_z(), psi_plus(), 803, SHOTS / 2);
    let ad_two = two_step_check(&fixtures::fix_ad(), basis_vector(2, 1), 804, SHOTS / 2);

    let tol = Tolerances::default();
    let qsr = qsr_from_instrument(&fixtures::fix_ad(), &tol).expect("dilation").qsr().expect("factorizable").clone();
    let model = MeasurementModel::pure(qsr, psi_plus(), &tol).expect("model");
    let record = |seed| {
        run_trajectory_seeded(&model, 200, seed)
            .expect("trajectory")
            .steps
            .iter()
            .flat_map(shot_bits)
            .collect::<Vec<_>>()
    };
    let reproducible = record(805) == record(805);

    let worst = z_excess.max(ad_excess).max(z_two).max(ad_two);
    Outcome::check(
        worst <= 0.0 && reproducible,
        format!(
            "worst |count-np|-3σ: Z {z_excess:.1}, AD {ad_excess:.1}, two-step Z {z_two:.1}, AD {ad_two:.1}; bitwise replay {}",
            if reproducible { "identical" } else { "differs" }
        ),
    )
}

fn main() -> ExitCode {
    let corpus = corpus();
    let results = [
        run("C1 von Neumann reproduction", Some(Duration::from_secs(1)), c1_von_neumann),
        run("C2 dilation round trip", Some(Duration::from_secs(30)), || c2_dilation(&corpus)),
        run("C3 operator and scalar orthonormality", None, || c3_orthonormality(&corpus)),
        run("C4 unitary and phase equivalence", None, c4_unitary_equivalence),
        run("C5 gauge invariance of stochastic realizations", None, c5_gauge),
        run("C6 factorization soundness and stability", None, c6_factorization),
        run("C7 measurement-model identities", None, c7_identities),
        run("C8 sampler statistics and reproducibility", Some(Duration::from_secs(10)), c8_sampler),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
