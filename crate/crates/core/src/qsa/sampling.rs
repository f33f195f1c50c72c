use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qcore::ComplexVector;
use crate::qsa::{output_law, posterior_pure, MeasurementModel};
use crate::Tolerances;

/// The random stream used by the command-line tools and reference tests.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Joint-law entries at or below this mass are never sampled.
const UNSAMPLEABLE: f64 = 1e-12;

/// One sampled outcome with its channel and posterior pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotResult {
    pub atom: usize,
    pub outcome: String,
    pub channel: usize,
    pub state: ComplexVector,
    /// `m({ω})`.
    pub probability: f64,
    /// `q_i(ω)`.
    pub weight: f64,
}

/// Sequence of shots where each step starts from the previous posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: Option<u64>,
    pub initial: ComplexVector,
    pub steps: Vec<ShotResult>,
}

impl Trajectory {
    /// Input state of every step: the initial state followed by each
    /// posterior except the last.
    pub fn inputs(&self) -> Vec<&ComplexVector> {
        std::iter::once(&self.initial)
            .chain(self.steps.iter().map(|s| &s.state))
            .take(self.steps.len())
            .collect()
    }

    pub fn outcomes(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.atom).collect()
    }
}

/// Draws `(ω, i)` from `P(ω, i) = α⁽ⁱ⁾k⁽ⁱ⁾ m⁽ⁱ⁾({ω})` with one uniform draw:
/// inverse CDF over atoms in declared order, then channels in index order,
/// taking the first entry whose cumulative mass is `≥` the draw.
pub fn sample_shot<R: Rng + ?Sized>(model: &MeasurementModel, rng: &mut R) -> Result<ShotResult> {
    if model.pure_state().is_none() {
        return Err(Error::MixedInitialState);
    }
    let law = output_law(model)?;
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut chosen = None;
    'outer: for atom in 0..law.total.len() {
        for (i, &(a, k)) in law.channels.iter().enumerate() {
            let mass = a * k as f64 * law.per_channel[i][atom];
            if mass <= UNSAMPLEABLE {
                continue;
            }
            chosen = Some((atom, i));
            cumulative += mass;
            if cumulative >= draw {
                break 'outer;
            }
        }
    }
    // rounding can leave the total just below the draw: keep the last entry
    let (atom, channel) = chosen.ok_or_else(|| Error::ZeroProbabilityEvent("every outcome has zero probability".into()))?;
    let tol = Tolerances::default();
    let (a, k) = law.channels[channel];
    Ok(ShotResult {
        atom,
        outcome: model.qsr().space().label(atom).to_string(),
        channel,
        state: posterior_pure(model, channel, atom, &tol)?,
        probability: law.total[atom],
        weight: a * k as f64 * law.per_channel[channel][atom] / law.total[atom],
    })
}

/// Runs `steps` shots, feeding each posterior into the next step.
pub fn run_trajectory<R: Rng + ?Sized>(
    model: &MeasurementModel,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let initial = model.pure_state().ok_or(Error::MixedInitialState)?.clone();
    if steps == 0 {
        return Err(Error::DimensionMismatch("a trajectory needs at least one step".into()));
    }
    let mut current = model.clone();
    let mut shots = Vec::with_capacity(steps);
    for _ in 0..steps {
        let shot = sample_shot(&current, rng)?;
        current = current.with_pure_state(shot.state.clone());
        shots.push(shot);
    }
    Ok(Trajectory {
        seed: None,
        initial,
        steps: shots,
    })
}

/// [`run_trajectory`] on a fresh [`SimRng`] seeded with `seed`, recording
/// the seed.
pub fn run_trajectory_seeded(model: &MeasurementModel, steps: usize, seed: u64) -> Result<Trajectory> {
    let mut trajectory = run_trajectory(model, steps, &mut seeded_rng(seed))?;
    trajectory.seed = Some(seed);
    Ok(trajectory)
}
