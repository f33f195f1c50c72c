use num_complex::Complex64;

use crate::error::Result;
use crate::qcore::{ComplexMatrix, FiniteMeasure};
use crate::realization::{phase_aligned_deviation, InvariantComparison, InvariantSet, ScalarTable};
use crate::stochrep::StochasticRealization;
use crate::Tolerances;

/// Pairwise densities of the scalar table against the base measure.
///
/// `modes[j][i][k][p][ω] = Σ_n q[j][k][n]* q[i][p][n]` and
/// `pairwise[j][i][ω] = k⁽ⁱ⁾⁻¹ Σ_k modes[j][i][k][k][ω]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDensities {
    pub base: FiniteMeasure,
    pub modes: Vec<Vec<Vec<Vec<Vec<Complex64>>>>>,
    pub pairwise: Vec<Vec<Vec<Complex64>>>,
}

impl ChannelDensities {
    pub(crate) fn from_table(q: &ScalarTable, channels: &[(f64, usize)], base: &FiniteMeasure) -> Self {
        let atoms = base.space().len();
        let modes: Vec<Vec<Vec<Vec<Vec<Complex64>>>>> = (0..channels.len())
            .map(|j| {
                (0..channels.len())
                    .map(|i| {
                        (0..channels[j].1)
                            .map(|k| {
                                (0..channels[i].1)
                                    .map(|p| {
                                        (0..atoms)
                                            .map(|atom| {
                                                q[j][k][atom]
                                                    .iter()
                                                    .zip(&q[i][p][atom])
                                                    .map(|(a, b)| a.conj() * b)
                                                    .sum()
                                            })
                                            .collect()
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let pairwise = (0..channels.len())
            .map(|j| {
                (0..channels.len())
                    .map(|i| {
                        let k_i = channels[i].1;
                        let shared = k_i.min(channels[j].1);
                        (0..atoms)
                            .map(|atom| {
                                (0..shared).map(|k| modes[j][i][k][k][atom]).sum::<Complex64>() / k_i as f64
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            base: base.clone(),
            modes,
            pairwise,
        }
    }

    /// `p_i(ω) = p_ii(ω)`.
    pub fn diagonal(&self, i: usize) -> Vec<f64> {
        self.pairwise[i][i].iter().map(|z| z.re).collect()
    }

    /// Largest deviation of `Σ_ω p_ji(ω) ν(ω)` from `δ_ji`.
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, row) in self.pairwise.iter().enumerate() {
            for (i, density) in row.iter().enumerate() {
                let integral: Complex64 = density
                    .iter()
                    .enumerate()
                    .map(|(atom, p)| p * self.base.weight(atom))
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((integral - target).norm());
            }
        }
        worst
    }

    /// Smallest diagonal density value (should be ≥ 0).
    pub fn min_diagonal(&self) -> f64 {
        (0..self.pairwise.len())
            .flat_map(|i| self.diagonal(i))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Invariant record of a stochastic realization. `set.eigenvalues` holds the
/// `(β⁽ⁱ⁾, k⁽ⁱ⁾)` profile in table order, `set.channel_measures` the
/// `ν̃⁽ⁱ⁾` and `set.channel_operators` the `Θ̃⁽ⁱ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrInvariants {
    pub set: InvariantSet,
    pub densities: ChannelDensities,
}

impl SrInvariants {
    /// Largest deviation among the internal identities: the weight and
    /// mixture relations of the set and `p_ii ν̃ = ν̃⁽ⁱ⁾`.
    pub fn consistency_deviation(&self) -> f64 {
        let mut worst = self.set.consistency_deviation();
        for (i, row) in self.set.channel_measures.iter().enumerate() {
            for (atom, (&m, p)) in row.iter().zip(self.densities.diagonal(i)).enumerate() {
                worst = worst.max((p * self.densities.base.weight(atom) - m).abs());
            }
        }
        worst
    }

    /// Compares two records, matching channels by `(β, k, ν̃⁽ⁱ⁾)` and
    /// aligning the `Θ̃⁽ⁱ⁾` tables by one global phase.
    pub fn compare(&self, other: &SrInvariants, tol: &Tolerances) -> InvariantComparison {
        let a = &self.set;
        let b = &other.set;
        let failed = InvariantComparison {
            structure_equal: false,
            measure_deviation: f64::INFINITY,
            operator_deviation: f64::INFINITY,
            phase: 0.0,
            passed: false,
        };
        if a.support != b.support
            || a.multiplicities != b.multiplicities
            || a.eigenvalues.len() != b.eigenvalues.len()
        {
            return failed;
        }
        let mut best: Option<InvariantComparison> = None;
        let mut used = vec![false; b.eigenvalues.len()];
        let mut order = Vec::with_capacity(b.eigenvalues.len());
        search(a, b, tol, &mut used, &mut order, &mut best);
        best.unwrap_or(failed)
    }
}

fn channels_match(a: &InvariantSet, i: usize, b: &InvariantSet, j: usize, tol: &Tolerances) -> bool {
    let profile_tol = tol.identity.max(tol.cluster);
    a.eigenvalues[i].1 == b.eigenvalues[j].1
        && (a.eigenvalues[i].0 - b.eigenvalues[j].0).abs() <= profile_tol
        && measure_deviation(&a.channel_measures[i], &b.channel_measures[j]) <= tol.identity
}

fn measure_deviation(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Depth-first search over channel matchings, keeping the one with the
/// smallest phase-aligned operator deviation.
fn search(
    a: &InvariantSet,
    b: &InvariantSet,
    tol: &Tolerances,
    used: &mut [bool],
    order: &mut Vec<usize>,
    best: &mut Option<InvariantComparison>,
) {
    let i = order.len();
    if i == a.eigenvalues.len() {
        let permuted: Vec<Vec<ComplexMatrix>> = order.iter().map(|&j| b.channel_operators[j].clone()).collect();
        let (operator_deviation, phase) = phase_aligned_deviation(&a.channel_operators, &permuted);
        let measure = order
            .iter()
            .enumerate()
            .map(|(i, &j)| measure_deviation(&a.channel_measures[i], &b.channel_measures[j]))
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|c| operator_deviation < c.operator_deviation) {
            *best = Some(InvariantComparison {
                structure_equal: true,
                measure_deviation: measure,
                operator_deviation,
                phase,
                passed: measure <= tol.identity && operator_deviation <= tol.identity,
            });
        }
        return;
    }
    for j in 0..used.len() {
        if !used[j] && channels_match(a, i, b, j, tol) {
            used[j] = true;
            order.push(j);
            search(a, b, tol, used, order, best);
            order.pop();
            used[j] = false;
        }
    }
}

/// Invariant record of `sr`: `ν̃⁽ⁱ⁾ = k⁻¹ Σ_k Σ_n |q|² ν̃`, the total
/// `Σ β k ν̃⁽ⁱ⁾`, `Θ̃⁽ⁱ⁾ = k⁻¹ Σ_k Σ_n W q* ν̃`, the total `Σ β k Θ̃⁽ⁱ⁾` and
/// the channel densities.
pub fn sr_invariants(sr: &StochasticRealization) -> SrInvariants {
    let atoms = sr.dims().len();
    let dim_s = sr.dim_s();
    let nu = sr.nu();
    let mut channel_measures = Vec::with_capacity(sr.channels().len());
    let mut channel_operators = Vec::with_capacity(sr.channels().len());
    let mut total_measure = vec![0.0; atoms];
    let mut total_operator = vec![ComplexMatrix::zeros(dim_s, dim_s); atoms];
    for (i, &(beta, k)) in sr.channels().iter().enumerate() {
        let mut measures = vec![0.0; atoms];
        let mut operators = vec![ComplexMatrix::zeros(dim_s, dim_s); atoms];
        for atom in 0..atoms {
            let w = nu.weight(atom) / k as f64;
            for kk in 0..k {
                for (wop, q) in sr.w(i, kk, atom).iter().zip(sr.q(i, kk, atom)) {
                    measures[atom] += q.norm_sqr() * w;
                    operators[atom] += wop * (q.conj() * w);
                }
            }
            total_measure[atom] += beta * k as f64 * measures[atom];
            total_operator[atom] += &operators[atom] * Complex64::new(beta * k as f64, 0.0);
        }
        channel_measures.push(measures);
        channel_operators.push(operators);
    }
    SrInvariants {
        set: InvariantSet {
            support: nu.support(),
            multiplicities: sr.dims().to_vec(),
            eigenvalues: sr.channels().to_vec(),
            channel_measures,
            total_measure,
            channel_operators,
            total_operator,
        },
        densities: ChannelDensities::from_table(sr.q_table(), sr.channels(), nu),
    }
}

/// Whether `sr1` and `sr2` carry the same invariants within `tol`.
pub fn equivalent(sr1: &StochasticRealization, sr2: &StochasticRealization, tol: &Tolerances) -> Result<bool> {
    sr1.space().ensure_same(sr2.space())?;
    if sr1.dim_s() != sr2.dim_s() {
        return Ok(false);
    }
    Ok(sr_invariants(sr1).compare(&sr_invariants(sr2), tol).passed)
}
