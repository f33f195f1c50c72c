use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityOperator, OutcomeSpace};

/// Probability of one atom and, when it is positive, the normalized
/// post-measurement state.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPosterior {
    pub probability: f64,
    pub posterior: Option<DensityOperator>,
}

/// Posterior states of an instrument for a fixed input state.
///
/// Also keeps the unnormalized per-atom pieces, from which conditional states
/// over arbitrary events and the prior state are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFamily {
    space: OutcomeSpace,
    atoms: Vec<AtomPosterior>,
    pieces: Vec<ComplexMatrix>,
    zero_probability: f64,
}

impl PosteriorFamily {
    pub(crate) fn from_pieces(
        space: OutcomeSpace,
        pieces: Vec<ComplexMatrix>,
        zero_probability: f64,
    ) -> Self {
        let atoms = pieces
            .iter()
            .map(|piece| {
                let probability = piece.trace().re.max(0.0);
                let posterior = (probability > zero_probability)
                    .then(|| DensityOperator::from_positive_unchecked(piece));
                AtomPosterior {
                    probability,
                    posterior,
                }
            })
            .collect();
        Self {
            space,
            atoms,
            pieces,
            zero_probability,
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn atoms(&self) -> &[AtomPosterior] {
        &self.atoms
    }

    pub fn probability(&self, atom: usize) -> f64 {
        self.atoms[atom].probability
    }

    /// `None` marks an atom of (numerically) zero probability.
    pub fn posterior(&self, atom: usize) -> Option<&DensityOperator> {
        self.atoms[atom].posterior.as_ref()
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).sum()
    }

    /// State conditioned on the event `atoms`.
    pub fn conditional(&self, atoms: &[usize]) -> Result<DensityOperator> {
        if atoms.is_empty() {
            return Err(Error::EmptySelection);
        }
        let dim = self.pieces[0].nrows();
        let sum = atoms
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, &a| acc + &self.pieces[a]);
        let p = sum.trace().re;
        if p <= self.zero_probability {
            let labels: Vec<&str> = atoms.iter().map(|&a| self.space.label(a)).collect();
            return Err(Error::ZeroProbabilityEvent(format!("{labels:?}")));
        }
        Ok(DensityOperator::from_positive_unchecked(&sum))
    }

    /// Post-measurement state with the outcome ignored.
    pub fn prior(&self) -> Result<DensityOperator> {
        let all: Vec<usize> = (0..self.atoms.len()).collect();
        self.conditional(&all)
    }

    /// `Σ_ω p(ω) ρ(ω)` over atoms with a defined posterior.
    pub fn mixture(&self) -> ComplexMatrix {
        let dim = self.pieces[0].nrows();
        self.atoms
            .iter()
            .filter_map(|a| a.posterior.as_ref().map(|post| (a.probability, post)))
            .fold(ComplexMatrix::zeros(dim, dim), |acc, (p, post)| {
                acc + post.matrix() * Complex64::new(p, 0.0)
            })
    }
}
