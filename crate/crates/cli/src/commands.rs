use std::collections::BTreeMap;

use qsa_core::instrument::KrausInstrument;
use qsa_core::qcore::{max_abs_diff, ComplexMatrix, ComplexVector, DensityOperator, OutcomeSpace};
use qsa_core::qsa::{output_law, run_trajectory, seeded_rng, verify_model, MeasurementModel};
use qsa_core::realization::{dilate, instrument_of, invariants, von_neumann_process, DilationMode, InvariantSet};
use qsa_core::stochrep::{
    equivalent, factorize, from_realization_with, qsr_from_instrument, sr_invariants, Factorization,
};
use qsa_core::Tolerances;
use serde::Serialize;

use crate::error::CliError;
use crate::report::{Provenance, RecordRow, Report, ReportBuilder};
use crate::scenario::{encode_matrix, encode_qsr, encode_realization, Decoder, MatrixJson, Payload, Scenario};

pub const DEFAULT_SHOTS: usize = 1000;
pub const DEFAULT_STEPS: usize = 1;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Dilate,
    Invariants,
    ExtractQsr,
    Compare,
    VonNeumann,
    Simulate,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Dilate => "dilate",
            Command::Invariants => "invariants",
            Command::ExtractQsr => "extract-qsr",
            Command::Compare => "compare",
            Command::VonNeumann => "von-neumann",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }
}

/// Command-line overrides of the scenario `params`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Options {
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    pub steps: Option<usize>,
}

/// Runs `command` on a validated scenario. Library errors raised while the
/// command runs become failed checks; only an unsuitable payload or a
/// missing section is an error.
pub fn execute(scenario: &Scenario, command: Command, options: &Options, digest: &str) -> Result<Report, CliError> {
    let mut b = ReportBuilder::default();
    let mut seed = None;
    match command {
        Command::Validate => validate(scenario, &mut b),
        Command::Dilate => run_dilate(scenario, &mut b),
        Command::Invariants => run_invariants(scenario, &mut b)?,
        Command::ExtractQsr => extract_qsr(scenario, &mut b)?,
        Command::Compare => compare(scenario, &mut b)?,
        Command::VonNeumann => von_neumann(scenario, &mut b)?,
        Command::Simulate => seed = Some(simulate(scenario, options, &mut b)?),
        Command::Verify => verify(scenario, &mut b)?,
    }
    let provenance = Provenance {
        input_sha256: digest.into(),
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    Ok(b.finish(command.name(), scenario.payload.kind(), provenance))
}

fn incompatible(command: Command, payload: &Payload) -> CliError {
    CliError::IncompatiblePayload {
        command: command.name().into(),
        payload: payload.kind().into(),
    }
}

fn by_label<T: Serialize>(space: &OutcomeSpace, values: impl IntoIterator<Item = T>) -> BTreeMap<String, T> {
    space.labels().iter().cloned().zip(values).collect()
}

fn validate(s: &Scenario, b: &mut ReportBuilder) {
    let tol = &s.tol;
    let t = match s.payload.instrument() {
        Ok(t) => t,
        Err(e) => return b.failure("instrument", e),
    };
    let r = t.validate(tol);
    b.bound("completeness", r.completeness_deviation, tol.identity);
    let lowest = r.choi_min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    b.bound("choi_positivity", -lowest, tol.psd_floor);
    match &s.payload {
        Payload::Stochastic(sr) => {
            let (scalar, operator) = sr.orthonormality_deviations();
            b.bound("scalar_orthonormality", scalar, tol.identity);
            b.bound("operator_orthonormality", operator, tol.identity);
        }
        Payload::Model(m) => {
            b.bound("qsr_orthonormality", m.qsr().orthonormality_deviation(), tol.identity);
            b.bound("channel_measures", m.qsr().channel_measure_deviation(), tol.identity);
        }
        Payload::Instrument(_) | Payload::Realization(_) => {}
    }
    b.table("kraus_counts", by_label(t.space(), t.kraus_lists().iter().map(Vec::len)));
    b.table("choi_min_eigenvalues", by_label(t.space(), r.choi_min_eigenvalues));
    b.table("pov", by_label(t.space(), t.pov_measure().elements().iter().map(encode_matrix)));
}

fn run_dilate(s: &Scenario, b: &mut ReportBuilder) {
    let t = match s.payload.instrument() {
        Ok(t) => t,
        Err(e) => return b.failure("instrument", e),
    };
    for (mode, name) in [(DilationMode::Minimal, "minimal"), (DilationMode::Invariant, "invariant")] {
        match dilate(&t, mode).and_then(|g| Ok((instrument_of(&g)?, g))) {
            Ok((back, g)) => {
                b.bound(&format!("round_trip_{name}"), back.choi_distance(&t), s.tol.identity);
                b.table(&format!("realization_{name}"), encode_realization(&g));
            }
            Err(e) => b.failure(&format!("round_trip_{name}"), e),
        }
    }
}

#[derive(Serialize)]
struct InvariantTables {
    support: Vec<String>,
    multiplicities: BTreeMap<String, usize>,
    eigenvalues: Vec<(f64, usize)>,
    channel_measures: Vec<BTreeMap<String, f64>>,
    total_measure: BTreeMap<String, f64>,
    channel_operators: Vec<BTreeMap<String, MatrixJson>>,
    total_operator: BTreeMap<String, MatrixJson>,
}

impl InvariantTables {
    fn new(space: &OutcomeSpace, set: &InvariantSet) -> Self {
        let ops = |row: &[ComplexMatrix]| by_label(space, row.iter().map(encode_matrix));
        Self {
            support: set.support.iter().map(|&a| space.label(a).to_string()).collect(),
            multiplicities: by_label(space, set.multiplicities.iter().copied()),
            eigenvalues: set.eigenvalues.clone(),
            channel_measures: set.channel_measures.iter().map(|row| by_label(space, row.iter().copied())).collect(),
            total_measure: by_label(space, set.total_measure.iter().copied()),
            channel_operators: set.channel_operators.iter().map(|row| ops(row)).collect(),
            total_operator: ops(&set.total_operator),
        }
    }
}

fn run_invariants(s: &Scenario, b: &mut ReportBuilder) -> Result<(), CliError> {
    match &s.payload {
        Payload::Realization(g) => match invariants(g) {
            Ok(set) => {
                b.bound("consistency", set.consistency_deviation(), s.tol.identity);
                b.table("invariants", InvariantTables::new(&s.space, &set));
            }
            Err(e) => b.failure("invariants", e),
        },
        Payload::Stochastic(sr) => {
            let inv = sr_invariants(sr);
            b.bound("consistency", inv.consistency_deviation(), s.tol.identity);
            b.bound("density_orthonormality", inv.densities.orthonormality_deviation(), s.tol.identity);
            b.table("invariants", InvariantTables::new(&s.space, &inv.set));
            let pairwise: Vec<Vec<Vec<[f64; 2]>>> = inv
                .densities
                .pairwise
                .iter()
                .map(|row| row.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect())
                .collect();
            b.table("densities", pairwise);
        }
        other => return Err(incompatible(Command::Invariants, other)),
    }
    Ok(())
}

fn extract_qsr(s: &Scenario, b: &mut ReportBuilder) -> Result<(), CliError> {
    let tol = &s.tol;
    let result = match &s.payload {
        Payload::Instrument(t) => qsr_from_instrument(t, tol),
        Payload::Realization(g) => {
            let nu = s.file.measure.as_ref().map(|_| scenario_measure(s)).transpose()?;
            from_realization_with(g, nu.as_ref()).and_then(|sr| factorize(&sr, tol))
        }
        Payload::Stochastic(sr) => factorize(sr, tol),
        other => return Err(incompatible(Command::ExtractQsr, other)),
    };
    let source = s.payload.instrument();
    match (result, source) {
        (Ok(Factorization::Factorized { qsr, .. }), Ok(source)) => {
            b.flag("factorizable", true, None);
            b.bound("orthonormality", qsr.orthonormality_deviation(), tol.identity);
            b.bound("instrument_match", qsr.instrument().choi_distance(&source), tol.identity);
            let measures: Vec<BTreeMap<String, f64>> = (0..qsr.channels().len())
                .map(|i| by_label(&s.space, (0..s.space.len()).map(|a| qsr.channel_measure(i, a))))
                .collect();
            b.table("channel_measures", measures);
            b.table("qsr", encode_qsr(&qsr));
        }
        (Ok(Factorization::NotFactorizable { channel, atom }), _) => {
            b.flag(
                "factorizable",
                false,
                Some(format!("NotFactorizable at ({channel},{})", s.space.label(atom))),
            );
        }
        (Err(e), _) | (_, Err(e)) => b.failure("factorizable", e),
    }
    Ok(())
}

fn scenario_measure(s: &Scenario) -> Result<qsa_core::qcore::FiniteMeasure, CliError> {
    let decoder = Decoder {
        dim_s: s.file.dim_s,
        space: s.space.clone(),
        tol: s.tol,
    };
    decoder.measure(s.file.measure.as_ref().expect("checked by caller"), "measure")
}

fn compare(s: &Scenario, b: &mut ReportBuilder) -> Result<(), CliError> {
    let other = s.compare_with.as_ref().ok_or_else(|| CliError::MissingSection {
        command: Command::Compare.name().into(),
        key: "compare_with".into(),
    })?;
    if let Payload::Model(_) = s.payload {
        return Err(incompatible(Command::Compare, &s.payload));
    }
    match (s.payload.instrument(), other.instrument()) {
        (Ok(a), Ok(c)) => b.bound("instrument_equal", a.choi_distance(&c), s.tol.identity),
        (Err(e), _) | (_, Err(e)) => b.failure("instrument_equal", e),
    }
    match (&s.payload, other) {
        (Payload::Realization(g1), Payload::Realization(g2)) => match (invariants(g1), invariants(g2)) {
            (Ok(a), Ok(c)) => {
                let cmp = a.compare(&c, &s.tol);
                b.flag(
                    "invariants_equal",
                    cmp.passed,
                    Some(format!(
                        "structure {}, measure deviation {:.3e}, operator deviation {:.3e}, phase {:.6}",
                        cmp.structure_equal, cmp.measure_deviation, cmp.operator_deviation, cmp.phase
                    )),
                );
            }
            (Err(e), _) | (_, Err(e)) => b.failure("invariants_equal", e),
        },
        (Payload::Stochastic(a), Payload::Stochastic(c)) => match equivalent(a, c, &s.tol) {
            Ok(eq) => b.flag("sr_equivalent", eq, None),
            Err(e) => b.failure("sr_equivalent", e),
        },
        _ => {}
    }
    Ok(())
}

fn von_neumann(s: &Scenario, b: &mut ReportBuilder) -> Result<(), CliError> {
    let section = s.file.von_neumann.as_ref().ok_or_else(|| CliError::MissingSection {
        command: Command::VonNeumann.name().into(),
        key: "von_neumann".into(),
    })?;
    let Payload::Instrument(t) = &s.payload else {
        return Err(incompatible(Command::VonNeumann, &s.payload));
    };
    let decoder = Decoder {
        dim_s: s.file.dim_s,
        space: s.space.clone(),
        tol: s.tol,
    };
    let psi = decoder.vector(&section.state, "von_neumann.state", s.file.dim_s)?;
    let outcomes = s.space.len();
    let dim_k = section
        .eta
        .as_ref()
        .map(Vec::len)
        .or_else(|| section.pointers.as_ref().and_then(|p| p.first()).map(Vec::len))
        .unwrap_or(outcomes);
    let pointers: Vec<ComplexVector> = match &section.pointers {
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(j, p)| decoder.vector(p, &format!("von_neumann.pointers[{j}]"), dim_k))
            .collect::<Result<_, _>>()?,
        None => (0..outcomes.min(dim_k))
            .map(|j| {
                let mut e = ComplexVector::zeros(dim_k);
                e[j] = num_complex::Complex64::new(1.0, 0.0);
                e
            })
            .collect(),
    };
    let eta = match &section.eta {
        Some(eta) => decoder.vector(eta, "von_neumann.eta", dim_k)?,
        None => pointers.first().cloned().unwrap_or_else(|| ComplexVector::zeros(dim_k)),
    };
    if let Some(atom) = (0..outcomes).find(|&a| t.kraus(a).len() != 1) {
        b.failure(
            "projective",
            format!("outcome `{}` must carry exactly one projection", s.space.label(atom)),
        );
        return Ok(());
    }
    let projections: Vec<ComplexMatrix> = (0..outcomes).map(|a| t.kraus(a)[0].clone()).collect();
    let chain = von_neumann_process(s.space.clone(), projections.clone(), &eta, &pointers)
        .and_then(|g| instrument_of(&g))
        .and_then(|back| {
            let rho = DensityOperator::pure(&psi)?;
            let dist = back.outcome_distribution(&rho)?;
            let family = back.posterior_family(&rho)?;
            Ok((back, rho, dist, family))
        });
    let (back, rho, dist, family) = match chain {
        Ok(x) => x,
        Err(e) => {
            b.failure("von_neumann_process", e);
            return Ok(());
        }
    };
    b.bound("instrument_match", back.choi_distance(t), s.tol.identity);
    let mut prob_dev: f64 = 0.0;
    let mut post_dev: f64 = 0.0;
    for (j, p) in projections.iter().enumerate() {
        let expected = (p * &psi).norm_squared();
        prob_dev = prob_dev.max((dist.weight(j) - expected).abs());
        if expected > s.tol.zero_probability {
            let raw = p * rho.matrix() * p.adjoint();
            let oracle = &raw / raw.trace();
            post_dev = match family.posterior(j) {
                Some(post) => post_dev.max(max_abs_diff(post.matrix(), &oracle)),
                None => f64::INFINITY,
            };
        }
    }
    b.bound("probabilities", prob_dev, s.tol.identity);
    b.bound("posteriors", post_dev, s.tol.identity);
    b.table("distribution", by_label(&s.space, dist.weights().iter().copied()));
    b.table(
        "posteriors",
        by_label(&s.space, (0..outcomes).map(|j| family.posterior(j).map(|p| encode_matrix(p.matrix())))),
    );
    Ok(())
}

/// `max |count − n p| / σ` over the entries, with `σ = √(n p (1 − p))`; an
/// entry with `σ = 0` contributes 0 when the count is exact and ∞ otherwise.
fn max_z_score(counts: &[usize], probabilities: &[f64], n: usize) -> f64 {
    counts
        .iter()
        .zip(probabilities)
        .map(|(&c, &p)| {
            let p = p.clamp(0.0, 1.0);
            let diff = (c as f64 - n as f64 * p).abs();
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            if sigma > 0.0 {
                diff / sigma
            } else if diff < 0.5 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn simulate(s: &Scenario, options: &Options, b: &mut ReportBuilder) -> Result<u64, CliError> {
    let Payload::Model(model) = &s.payload else {
        return Err(incompatible(Command::Simulate, &s.payload));
    };
    let params = s.params();
    let seed = options.seed.or(params.seed).unwrap_or(DEFAULT_SEED);
    let shots = options.shots.or(params.shots).unwrap_or(DEFAULT_SHOTS);
    let steps = options.steps.or(params.steps).unwrap_or(DEFAULT_STEPS);
    if shots == 0 {
        return Err(CliError::parse("shots", "must be positive"));
    }
    if steps == 0 {
        return Err(CliError::parse("steps", "must be positive"));
    }
    let mut rng = seeded_rng(seed);
    let atoms = s.space.len();
    let channels = model.qsr().channels().len();
    let mut rows = Vec::with_capacity(shots * steps);
    let mut first = vec![0usize; atoms];
    let mut first_channel = vec![vec![0usize; atoms]; channels];
    let mut pairs = vec![0usize; atoms * atoms];
    for _ in 0..shots {
        let trajectory = match run_trajectory(model, steps, &mut rng) {
            Ok(t) => t,
            Err(e) => {
                b.failure("sampling", e);
                return Ok(seed);
            }
        };
        let outcomes = trajectory.outcomes();
        first[outcomes[0]] += 1;
        first_channel[trajectory.steps[0].channel][outcomes[0]] += 1;
        if steps >= 2 {
            pairs[outcomes[0] * atoms + outcomes[1]] += 1;
        }
        rows.extend(trajectory.steps.into_iter().enumerate().map(|(k, shot)| RecordRow {
            step: k + 1,
            outcome: shot.outcome,
            channel: shot.channel,
            prob: shot.probability,
            weight: shot.weight,
            state: shot.state,
        }));
    }

    let law = match output_law(model) {
        Ok(law) => law,
        Err(e) => {
            b.failure("output_law", e);
            return Ok(seed);
        }
    };
    b.bound("first_step_3sigma", max_z_score(&first, &law.total, shots), 3.0);
    b.table("analytic", by_label(&s.space, law.total.iter().copied()));
    b.table("counts", by_label(&s.space, first.iter().copied()));
    b.table("frequencies", by_label(&s.space, first.iter().map(|&c| c as f64 / shots as f64)));
    let per_channel: Vec<BTreeMap<String, usize>> =
        first_channel.iter().map(|row| by_label(&s.space, row.iter().copied())).collect();
    b.table("channel_counts", per_channel);

    if steps >= 2 {
        let t = model.qsr().instrument();
        match two_step_oracle(&t, model) {
            Ok(expected) => {
                b.bound("two_step_3sigma", max_z_score(&pairs, &expected, shots), 3.0);
                let space = t.space().product(t.space());
                let table: BTreeMap<String, PairCount> = space
                    .labels()
                    .iter()
                    .cloned()
                    .zip(pairs.iter().zip(&expected).map(|(&count, &p)| PairCount { count, expected: p }))
                    .collect();
                b.table("two_step", table);
            }
            Err(e) => b.failure("two_step_3sigma", e),
        }
    }
    b.record(rows);
    Ok(seed)
}

#[derive(Serialize)]
struct PairCount {
    count: usize,
    expected: f64,
}

fn two_step_oracle(t: &KrausInstrument, model: &MeasurementModel) -> qsa_core::Result<Vec<f64>> {
    let rho = DensityOperator::with_tol(model.density(), &Tolerances::default())?;
    Ok(t.sequential_compose(t)?.outcome_distribution(&rho)?.weights().to_vec())
}

fn verify(s: &Scenario, b: &mut ReportBuilder) -> Result<(), CliError> {
    let Payload::Model(model) = &s.payload else {
        return Err(incompatible(Command::Verify, &s.payload));
    };
    let r = verify_model(model, &s.tol);
    b.bound("posterior_orthonormality", r.posterior_orthonormality, r.tolerance);
    b.bound("prior_average", r.prior_average, r.tolerance);
    b.bound("pov", r.pov, r.tolerance);
    b.bound("output_law", r.output_law, r.tolerance);
    b.bound("posterior", r.posterior, r.tolerance);
    match output_law(model) {
        Ok(law) => {
            b.table("output_law", by_label(&s.space, law.total.iter().copied()));
            let per_channel: Vec<BTreeMap<String, f64>> =
                law.per_channel.iter().map(|row| by_label(&s.space, row.iter().copied())).collect();
            b.table("per_channel", per_channel);
        }
        Err(e) => b.failure("output_law", e),
    }
    Ok(())
}
