use num_complex::Complex64;

use crate::error::Result;
use crate::qcore::{
    frobenius_inner, identity, max_abs_diff, partial_expectation_op, spectral_decompose,
    tensor_product, ComplexMatrix,
};
use crate::realization::{canonicalize, extract_vq, StatisticalRealization};
use crate::Tolerances;

/// Unitary invariants of a statistical realization.
///
/// Channel tables are indexed `[i][ω]` with channels in descending order of
/// the ancilla eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    /// Atoms with a non-zero PVM projection.
    pub support: Vec<usize>,
    /// `N(ω)` per atom.
    pub multiplicities: Vec<usize>,
    /// Positive eigenvalues of the ancilla state with multiplicities.
    pub eigenvalues: Vec<(f64, usize)>,
    /// `ν⁽ⁱ⁾({ω}) = tr[S⁽ⁱ⁾ P({ω})]`.
    pub channel_measures: Vec<Vec<f64>>,
    /// `ν_g = Σ α⁽ⁱ⁾k⁽ⁱ⁾ ν⁽ⁱ⁾`.
    pub total_measure: Vec<f64>,
    /// `Θ⁽ⁱ⁾({ω})`.
    pub channel_operators: Vec<Vec<ComplexMatrix>>,
    /// `Θ = Σ α⁽ⁱ⁾k⁽ⁱ⁾ Θ⁽ⁱ⁾`.
    pub total_operator: Vec<ComplexMatrix>,
}

/// Result of comparing two invariant sets.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantComparison {
    /// Supports, multiplicities and eigenvalue profiles coincide.
    pub structure_equal: bool,
    /// Max-abs difference of the channel measures.
    pub measure_deviation: f64,
    /// Max-abs difference of the channel operators after removing the best
    /// global phase.
    pub operator_deviation: f64,
    /// The global phase `φ` with `Θ₂ ≈ e^{iφ} Θ₁`.
    pub phase: f64,
    pub passed: bool,
}

impl InvariantSet {
    /// Internal consistency: `Σ α k = 1`, each `ν⁽ⁱ⁾` a probability measure
    /// and `ν_g = Σ α k ν⁽ⁱ⁾`. Returns the largest deviation.
    pub fn consistency_deviation(&self) -> f64 {
        let weight: f64 = self.eigenvalues.iter().map(|&(a, k)| a * k as f64).sum();
        let mut worst = (weight - 1.0).abs();
        for row in &self.channel_measures {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        for atom in 0..self.total_measure.len() {
            let mixed: f64 = self
                .eigenvalues
                .iter()
                .zip(&self.channel_measures)
                .map(|(&(a, k), row)| a * k as f64 * row[atom])
                .sum();
            worst = worst.max((mixed - self.total_measure[atom]).abs());
        }
        worst
    }

    pub fn compare(&self, other: &InvariantSet, tol: &Tolerances) -> InvariantComparison {
        let profile_tol = tol.identity.max(tol.cluster);
        let structure_equal = self.support == other.support
            && self.multiplicities == other.multiplicities
            && self.eigenvalues.len() == other.eigenvalues.len()
            && self
                .eigenvalues
                .iter()
                .zip(&other.eigenvalues)
                .all(|(a, b)| a.1 == b.1 && (a.0 - b.0).abs() <= profile_tol);
        if !structure_equal {
            return InvariantComparison {
                structure_equal,
                measure_deviation: f64::INFINITY,
                operator_deviation: f64::INFINITY,
                phase: 0.0,
                passed: false,
            };
        }
        let measure_deviation = self
            .channel_measures
            .iter()
            .flatten()
            .zip(other.channel_measures.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let (operator_deviation, phase) =
            phase_aligned_deviation(&self.channel_operators, &other.channel_operators);
        InvariantComparison {
            structure_equal,
            measure_deviation,
            operator_deviation,
            phase,
            passed: measure_deviation <= tol.identity && operator_deviation <= tol.identity,
        }
    }
}

/// Best global phase `φ` aligning `b ≈ e^{iφ} a` (argument of the summed
/// Frobenius inner product) and the remaining max-abs deviation.
pub(crate) fn phase_aligned_deviation(a: &[Vec<ComplexMatrix>], b: &[Vec<ComplexMatrix>]) -> (f64, f64) {
    let overlap: Complex64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| frobenius_inner(x, y))
        .sum();
    let phase = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
    let factor = Complex64::from_polar(1.0, phase);
    let deviation = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| max_abs_diff(&(x * factor), y))
        .fold(0.0, f64::max);
    (deviation, phase)
}

/// Invariant set of `g`, with `Θ⁽ⁱ⁾` computed from the operator/scalar
/// tables under the default canonical form.
pub fn invariants(g: &StatisticalRealization) -> Result<InvariantSet> {
    let tol = Tolerances::default();
    let cf = canonicalize(g, None)?;
    let vq = extract_vq(g, &cf, &tol)?;
    let atoms = g.space().len();
    let dim_s = g.dim_s();

    let channel_measures: Vec<Vec<f64>> = channel_states(g, &tol)?
        .iter()
        .map(|s_i| {
            (0..atoms)
                .map(|atom| (s_i * g.pvm().projection(atom)).trace().re)
                .collect()
        })
        .collect();
    let channel_operators: Vec<Vec<ComplexMatrix>> = (0..vq.channels().len())
        .map(|i| (0..atoms).map(|atom| vq.theta(i, atom)).collect())
        .collect();

    let mut total_measure = vec![0.0; atoms];
    let mut total_operator = vec![ComplexMatrix::zeros(dim_s, dim_s); atoms];
    for (i, &(alpha, k)) in vq.channels().iter().enumerate() {
        let w = alpha * k as f64;
        for atom in 0..atoms {
            total_measure[atom] += w * channel_measures[i][atom];
            total_operator[atom] += &channel_operators[i][atom] * Complex64::new(w, 0.0);
        }
    }
    Ok(InvariantSet {
        support: cf.support(),
        multiplicities: cf.dims().to_vec(),
        eigenvalues: vq.channels().to_vec(),
        channel_measures,
        total_measure,
        channel_operators,
        total_operator,
    })
}

/// `S⁽ⁱ⁾ = p̂ᵢ / k(α⁽ⁱ⁾)` for every positive eigenvalue cluster.
fn channel_states(g: &StatisticalRealization, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
    Ok(spectral_decompose(g.state().matrix(), tol.cluster)?
        .into_iter()
        .filter(|c| c.value > tol.cluster)
        .map(|c| c.projection() / Complex64::new(c.multiplicity as f64, 0.0))
        .collect())
}

/// `Θ⁽ⁱ⁾({ω}) = E_{S⁽ⁱ⁾}[(I ⊗ P({ω}))U]`, the direct evaluation used to
/// cross-check the table-based route.
pub fn channel_operators_direct(g: &StatisticalRealization) -> Result<Vec<Vec<ComplexMatrix>>> {
    let tol = Tolerances::default();
    let eye = identity(g.dim_s());
    let u = g.unitary().matrix();
    channel_states(g, &tol)?
        .iter()
        .map(|s_i| {
            (0..g.space().len())
                .map(|atom| partial_expectation_op(&(tensor_product(&eye, g.pvm().projection(atom)) * u), s_i))
                .collect()
        })
        .collect()
}
