//! Channel-resolved measurement statistics, posterior states and sampled
//! trajectories of a quantum stochastic representation.
//!
//! Channel `i` carries the weight `α⁽ⁱ⁾k⁽ⁱ⁾`.

mod sampling;

pub use sampling::{run_trajectory, run_trajectory_seeded, sample_shot, seeded_rng, ShotResult, SimRng, Trajectory};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{max_abs_diff, ComplexMatrix, ComplexVector, DensityOperator};
use crate::stochrep::QuantumStochasticRep;
use crate::Tolerances;

/// Initial system state of a measurement model.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(ComplexVector),
    Mixed(DensityOperator),
}

/// A quantum stochastic representation together with the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    qsr: QuantumStochasticRep,
    state: InitialState,
}

impl MeasurementModel {
    /// Model with a pure initial state; `psi` must have unit norm within
    /// `tol.identity`.
    pub fn pure(qsr: QuantumStochasticRep, psi: ComplexVector, tol: &Tolerances) -> Result<Self> {
        if psi.len() != qsr.dim_s() {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {} for a {}-dimensional system",
                psi.len(),
                qsr.dim_s()
            )));
        }
        let norm = psi.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tol.identity {
            return Err(Error::InvalidDensity(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            qsr,
            state: InitialState::Pure(psi),
        })
    }

    pub fn mixed(qsr: QuantumStochasticRep, rho: DensityOperator) -> Result<Self> {
        if rho.dim() != qsr.dim_s() {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {} for a {}-dimensional system",
                rho.dim(),
                qsr.dim_s()
            )));
        }
        Ok(Self {
            qsr,
            state: InitialState::Mixed(rho),
        })
    }

    pub fn qsr(&self) -> &QuantumStochasticRep {
        &self.qsr
    }

    pub fn state(&self) -> &InitialState {
        &self.state
    }

    pub fn pure_state(&self) -> Option<&ComplexVector> {
        match &self.state {
            InitialState::Pure(psi) => Some(psi),
            InitialState::Mixed(_) => None,
        }
    }

    /// The initial state as a density matrix.
    pub fn density(&self) -> ComplexMatrix {
        match &self.state {
            InitialState::Pure(psi) => psi * psi.adjoint(),
            InitialState::Mixed(rho) => rho.matrix().clone(),
        }
    }

    /// Same representation, new pure state (no norm check).
    pub(crate) fn with_pure_state(&self, psi: ComplexVector) -> Self {
        Self {
            qsr: self.qsr.clone(),
            state: InitialState::Pure(psi),
        }
    }

    /// `tr[Π⁽ⁱ⁾(ω) ρ Π⁽ⁱ⁾(ω)†]`.
    fn transition_mass(&self, i: usize, atom: usize) -> f64 {
        let pi = self.qsr.pi(i, atom);
        match &self.state {
            InitialState::Pure(psi) => (pi * psi).norm_squared(),
            InitialState::Mixed(rho) => (pi * rho.matrix() * pi.adjoint()).trace().re,
        }
    }
}

/// Per-channel output measures `m⁽ⁱ⁾({ω})` and the total `m({ω})`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLaw {
    /// `(α⁽ⁱ⁾, k⁽ⁱ⁾)` per channel.
    pub channels: Vec<(f64, usize)>,
    /// `m⁽ⁱ⁾({ω})`, indexed `[i][ω]`.
    pub per_channel: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

impl OutputLaw {
    /// Largest deviation of `m` from `Σ α k m⁽ⁱ⁾` and of its mass from 1.
    pub fn consistency_deviation(&self) -> f64 {
        let mut worst = (self.total.iter().sum::<f64>() - 1.0).abs();
        for (atom, &m) in self.total.iter().enumerate() {
            let mixed: f64 = self
                .channels
                .iter()
                .zip(&self.per_channel)
                .map(|(&(a, k), row)| a * k as f64 * row[atom])
                .sum();
            worst = worst.max((mixed - m).abs());
        }
        worst
    }
}

/// `m⁽ⁱ⁾({ω}) = tr[Π ρ Π†] ν⁽ⁱ⁾({ω})`, `m = Σ α k m⁽ⁱ⁾`.
pub fn output_law(model: &MeasurementModel) -> Result<OutputLaw> {
    let qsr = model.qsr();
    let atoms = qsr.space().len();
    let per_channel: Vec<Vec<f64>> = (0..qsr.channels().len())
        .map(|i| {
            (0..atoms)
                .map(|atom| model.transition_mass(i, atom) * qsr.channel_measure(i, atom))
                .collect()
        })
        .collect();
    let total = (0..atoms)
        .map(|atom| {
            qsr.channels()
                .iter()
                .zip(&per_channel)
                .map(|(&(a, k), row)| a * k as f64 * row[atom])
                .sum()
        })
        .collect();
    Ok(OutputLaw {
        channels: qsr.channels().to_vec(),
        per_channel,
        total,
    })
}

/// `q_i(ω) = α⁽ⁱ⁾k⁽ⁱ⁾ m⁽ⁱ⁾({ω}) / m({ω})`.
pub fn channel_weights(model: &MeasurementModel, atom: usize, tol: &Tolerances) -> Result<Vec<f64>> {
    let law = output_law(model)?;
    weights_from_law(&law, atom, tol, model)
}

fn weights_from_law(law: &OutputLaw, atom: usize, tol: &Tolerances, model: &MeasurementModel) -> Result<Vec<f64>> {
    let total = law.total[atom];
    if total <= tol.zero_probability {
        return Err(Error::ZeroProbabilityEvent(format!(
            "outcome `{}` has probability {total:.3e}",
            model.qsr().space().label(atom)
        )));
    }
    Ok(law
        .channels
        .iter()
        .zip(&law.per_channel)
        .map(|(&(a, k), row)| a * k as f64 * row[atom] / total)
        .collect())
}

/// `Π⁽ⁱ⁾(ω)ψ₀ / ‖Π⁽ⁱ⁾(ω)ψ₀‖`.
pub fn posterior_pure(model: &MeasurementModel, i: usize, atom: usize, tol: &Tolerances) -> Result<ComplexVector> {
    let psi = model.pure_state().ok_or(Error::MixedInitialState)?;
    let out = model.qsr().pi(i, atom) * psi;
    let norm2 = out.norm_squared();
    if norm2 <= tol.zero_probability {
        return Err(Error::ZeroProbabilityEvent(format!(
            "channel {i} cannot produce outcome `{}`",
            model.qsr().space().label(atom)
        )));
    }
    Ok(out / Complex64::new(norm2.sqrt(), 0.0))
}

/// `ρ(ω) = Σ_i ξ_i(ω) Π⁽ⁱ⁾ρΠ⁽ⁱ⁾†` with
/// `ξ_i = α⁽ⁱ⁾k⁽ⁱ⁾ ν⁽ⁱ⁾ / Σ_j α⁽ʲ⁾k⁽ʲ⁾ ν⁽ʲ⁾ tr[Π⁽ʲ⁾ρΠ⁽ʲ⁾†]`.
pub fn posterior_mixture(
    qsr: &QuantumStochasticRep,
    atom: usize,
    rho: &DensityOperator,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    if rho.dim() != qsr.dim_s() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for a {}-dimensional system",
            rho.dim(),
            qsr.dim_s()
        )));
    }
    let mut acc = ComplexMatrix::zeros(qsr.dim_s(), qsr.dim_s());
    for (i, &(a, k)) in qsr.channels().iter().enumerate() {
        let pi = qsr.pi(i, atom);
        let weight = a * k as f64 * qsr.channel_measure(i, atom);
        acc += pi * rho.matrix() * pi.adjoint() * Complex64::new(weight, 0.0);
    }
    let mass = acc.trace().re;
    if mass <= tol.zero_probability {
        return Err(Error::ZeroProbabilityEvent(format!(
            "outcome `{}` has probability {mass:.3e}",
            qsr.space().label(atom)
        )));
    }
    Ok(DensityOperator::from_positive_unchecked(&acc))
}

/// Joint law `P(ω, i)` indexed `[ω][i]`, computed as `m({ω}) q_i(ω)`.
/// Outcomes of zero probability get zero rows.
pub fn joint_by_outcome(model: &MeasurementModel, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    let law = output_law(model)?;
    (0..law.total.len())
        .map(|atom| match weights_from_law(&law, atom, tol, model) {
            Ok(w) => Ok(w.into_iter().map(|q| q * law.total[atom]).collect()),
            Err(Error::ZeroProbabilityEvent(_)) => Ok(vec![0.0; law.channels.len()]),
            Err(e) => Err(e),
        })
        .collect()
}

/// Joint law `P(ω, i)` indexed `[ω][i]`, computed as `α⁽ⁱ⁾k⁽ⁱ⁾ m⁽ⁱ⁾({ω})`
/// (channel first, then outcome).
pub fn joint_by_channel(model: &MeasurementModel) -> Result<Vec<Vec<f64>>> {
    let law = output_law(model)?;
    Ok((0..law.total.len())
        .map(|atom| {
            law.channels
                .iter()
                .zip(&law.per_channel)
                .map(|(&(a, k), row)| a * k as f64 * row[atom])
                .collect()
        })
        .collect())
}

/// Deviations found by [`verify_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    /// `Σ_ω tr[Π⁽ⁱ⁾ρΠ⁽ʲ⁾†] p_ji ν − δ_ji tr ρ`.
    pub posterior_orthonormality: f64,
    /// `Σ_i α k Σ_ω Π ρ Π† ν⁽ⁱ⁾` against the prior state of the instrument.
    pub prior_average: f64,
    /// `Σ_i α k Π†Π ν⁽ⁱ⁾` against the instrument's POV measure.
    pub pov: f64,
    /// Output law against the instrument's outcome distribution.
    pub output_law: f64,
    /// Posterior mixtures against the instrument's posterior family.
    pub posterior: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks the posterior orthonormality, prior-average and POV identities of
/// `model` and compares its laws against the Kraus form of the
/// representation.
pub fn verify_model(model: &MeasurementModel, tol: &Tolerances) -> ModelReport {
    let qsr = model.qsr();
    let rho = model.density();
    let dim = qsr.dim_s();
    let atoms = qsr.space().len();
    let n = qsr.channels().len();

    let mut orthonormality: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for atom in 0..atoms {
                let overlap = (qsr.pi(i, atom) * &rho * qsr.pi(j, atom).adjoint()).trace();
                acc += overlap * qsr.density(j, i, atom) * qsr.nu().weight(atom);
            }
            if i == j {
                acc -= rho.trace();
            }
            orthonormality = orthonormality.max(acc.norm());
        }
    }

    let instrument = qsr.instrument();
    let mut prior = ComplexMatrix::zeros(dim, dim);
    let mut pov = vec![ComplexMatrix::zeros(dim, dim); atoms];
    for (i, &(a, k)) in qsr.channels().iter().enumerate() {
        for (atom, element) in pov.iter_mut().enumerate() {
            let w = Complex64::new(a * k as f64 * qsr.channel_measure(i, atom), 0.0);
            let pi = qsr.pi(i, atom);
            prior += pi * &rho * pi.adjoint() * w;
            *element += pi.adjoint() * pi * w;
        }
    }
    let all: Vec<usize> = (0..atoms).collect();
    let prior_average = max_abs_diff(&prior, &instrument.predual_unchecked(&all, &rho));
    let pov_measure = instrument.pov_measure();
    let pov_deviation = pov
        .iter()
        .enumerate()
        .map(|(atom, m)| max_abs_diff(m, pov_measure.element(atom)))
        .fold(0.0, f64::max);

    let state = DensityOperator::from_positive_unchecked(&rho);
    let (law_deviation, posterior_deviation) = match (output_law(model), instrument.posterior_family(&state)) {
        (Ok(law), Ok(family)) => {
            let law_dev = (0..atoms)
                .map(|atom| (law.total[atom] - family.probability(atom)).abs())
                .fold(0.0, f64::max);
            let mut post_dev: f64 = 0.0;
            for atom in 0..atoms {
                match (posterior_mixture(qsr, atom, &state, tol), family.posterior(atom)) {
                    (Ok(a), Some(b)) => post_dev = post_dev.max(max_abs_diff(a.matrix(), b.matrix())),
                    (Err(_), None) => {}
                    // one side sees an event the other rules out
                    _ => post_dev = post_dev.max(law.total[atom].max(family.probability(atom))),
                }
            }
            (law_dev, post_dev)
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };

    let passed = [orthonormality, prior_average, pov_deviation, law_deviation, posterior_deviation]
        .iter()
        .all(|&d| d <= tol.identity);
    ModelReport {
        posterior_orthonormality: orthonormality,
        prior_average,
        pov: pov_deviation,
        output_law: law_deviation,
        posterior: posterior_deviation,
        tolerance: tol.identity,
        passed,
    }
}
