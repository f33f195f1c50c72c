use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::qcore::{fix_phase, identity, max_abs, max_abs_diff, ComplexMatrix, FiniteMeasure, OutcomeSpace};
use crate::realization::{dilate, DilationMode, ScalarTable};
use crate::stochrep::{from_realization, sr_invariants, ChannelDensities, StochasticRealization};
use crate::Tolerances;

/// Factorized representation: channel weights `(α⁽ⁱ⁾, k⁽ⁱ⁾)`, operators
/// `Π⁽ⁱ⁾(ω)`, pairwise densities `p_ji(ω)` and base measure `ν`.
///
/// The channel measures are `ν⁽ⁱ⁾({ω}) = p_ii(ω) ν({ω})`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumStochasticRep {
    dim_s: usize,
    channels: Vec<(f64, usize)>,
    nu: FiniteMeasure,
    pi: Vec<Vec<ComplexMatrix>>,
    densities: Vec<Vec<Vec<Complex64>>>,
}

impl QuantumStochasticRep {
    /// Checks shapes, weights, `p_ii ≥ 0` and the joint orthonormality
    /// `Σ_ω Π⁽ʲ⁾† Π⁽ⁱ⁾ p_ji ν = δ_ji I`.
    pub fn new(
        dim_s: usize,
        channels: Vec<(f64, usize)>,
        nu: FiniteMeasure,
        pi: Vec<Vec<ComplexMatrix>>,
        densities: Vec<Vec<Vec<Complex64>>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let qsr = Self::from_parts(dim_s, channels, nu, pi, densities)?;
        let total: f64 = qsr.channels.iter().map(|&(a, k)| a * k as f64).sum();
        if qsr.channels.iter().any(|&(a, k)| !(a > 0.0) || k == 0) || (total - 1.0).abs() > tol.identity {
            return Err(Error::WeightMismatch(format!("Σ α k = {total}")));
        }
        for i in 0..qsr.channels.len() {
            if let Some(atom) = (0..qsr.nu.space().len()).find(|&a| qsr.densities[i][i][a].re < -tol.identity) {
                return Err(Error::InvalidMeasure(format!(
                    "negative density for channel {i} at `{}`",
                    qsr.nu.space().label(atom)
                )));
            }
        }
        let deviation = qsr.orthonormality_deviation();
        if deviation > tol.identity {
            return Err(Error::NotOrthonormal(format!("joint family deviates by {deviation:.3e}")));
        }
        let deviation = qsr.channel_measure_deviation();
        if deviation > tol.identity {
            return Err(Error::InvalidMeasure(format!(
                "channel measures miss unit mass by {deviation:.3e}"
            )));
        }
        Ok(qsr)
    }

    fn from_parts(
        dim_s: usize,
        channels: Vec<(f64, usize)>,
        nu: FiniteMeasure,
        pi: Vec<Vec<ComplexMatrix>>,
        densities: Vec<Vec<Vec<Complex64>>>,
    ) -> Result<Self> {
        let n = channels.len();
        let atoms = nu.space().len();
        let shapes_ok = n > 0
            && pi.len() == n
            && densities.len() == n
            && pi.iter().all(|row| row.len() == atoms && row.iter().all(|m| m.shape() == (dim_s, dim_s)))
            && densities.iter().all(|row| row.len() == n && row.iter().all(|d| d.len() == atoms));
        if !shapes_ok {
            return Err(Error::DimensionMismatch(format!(
                "{n} channels over {atoms} atoms need {n}x{atoms} operators of size {dim_s} and {n}x{n}x{atoms} densities"
            )));
        }
        Ok(Self {
            dim_s,
            channels,
            nu,
            pi,
            densities,
        })
    }

    /// Replaces the operator table without re-checking orthonormality.
    pub fn with_operators(&self, pi: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        Self::from_parts(self.dim_s, self.channels.clone(), self.nu.clone(), pi, self.densities.clone())
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn space(&self) -> &OutcomeSpace {
        self.nu.space()
    }

    /// `(α⁽ⁱ⁾, k⁽ⁱ⁾)` per channel.
    pub fn channels(&self) -> &[(f64, usize)] {
        &self.channels
    }

    pub fn nu(&self) -> &FiniteMeasure {
        &self.nu
    }

    /// `Π⁽ⁱ⁾(ω)`.
    pub fn pi(&self, i: usize, atom: usize) -> &ComplexMatrix {
        &self.pi[i][atom]
    }

    pub fn pi_table(&self) -> &[Vec<ComplexMatrix>] {
        &self.pi
    }

    /// `p_ji(ω)`.
    pub fn density(&self, j: usize, i: usize, atom: usize) -> Complex64 {
        self.densities[j][i][atom]
    }

    pub fn densities(&self) -> &[Vec<Vec<Complex64>>] {
        &self.densities
    }

    /// `ν⁽ⁱ⁾({ω}) = p_ii(ω) ν({ω})`.
    pub fn channel_measure(&self, i: usize, atom: usize) -> f64 {
        self.densities[i][i][atom].re * self.nu.weight(atom)
    }

    /// Largest deviation of `Σ_ω Π⁽ʲ⁾† Π⁽ⁱ⁾ p_ji ν` from `δ_ji I`.
    pub fn orthonormality_deviation(&self) -> f64 {
        let n = self.channels.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let mut acc = ComplexMatrix::zeros(self.dim_s, self.dim_s);
                for atom in 0..self.nu.space().len() {
                    let w = self.densities[j][i][atom] * self.nu.weight(atom);
                    acc += self.pi[j][atom].adjoint() * &self.pi[i][atom] * w;
                }
                if i == j {
                    acc -= identity(self.dim_s);
                }
                worst = worst.max(max_abs(&acc));
            }
        }
        worst
    }

    /// Largest deviation of a channel measure's total mass from 1.
    pub fn channel_measure_deviation(&self) -> f64 {
        (0..self.channels.len())
            .map(|i| {
                let total: f64 = (0..self.nu.space().len()).map(|a| self.channel_measure(i, a)).sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Kraus form: atom ω carries `√(α⁽ⁱ⁾ k⁽ⁱ⁾ ν⁽ⁱ⁾({ω})) Π⁽ⁱ⁾(ω)`.
    pub fn instrument(&self) -> KrausInstrument {
        let kraus = (0..self.nu.space().len())
            .map(|atom| {
                self.channels
                    .iter()
                    .enumerate()
                    .map(|(i, &(alpha, k))| {
                        let weight = (alpha * k as f64 * self.channel_measure(i, atom)).max(0.0);
                        &self.pi[i][atom] * Complex64::new(weight.sqrt(), 0.0)
                    })
                    .collect()
            })
            .collect();
        KrausInstrument::new(self.space().clone(), self.dim_s, kraus).expect("shapes checked at construction")
    }
}

/// [`QuantumStochasticRep::instrument`] with the joint orthonormality check.
pub fn qsr_instrument(qsr: &QuantumStochasticRep, tol: &Tolerances) -> Result<KrausInstrument> {
    let deviation = qsr.orthonormality_deviation();
    if deviation > tol.identity {
        return Err(Error::NotOrthonormal(format!("joint family deviates by {deviation:.3e}")));
    }
    Ok(qsr.instrument())
}

/// Outcome of [`factorize`].
#[derive(Debug, Clone, PartialEq)]
pub enum Factorization {
    /// The representation and the rephased scalar factors `q` with
    /// `W[i][k][n](ω) = Π⁽ⁱ⁾(ω) q[i][k][n](ω)`.
    Factorized {
        qsr: QuantumStochasticRep,
        q_factors: ScalarTable,
    },
    /// The operators of channel `channel` at atom `atom` are not multiples
    /// of one operator with the given scalar factors.
    NotFactorizable { channel: usize, atom: usize },
}

impl Factorization {
    pub fn qsr(&self) -> Option<&QuantumStochasticRep> {
        match self {
            Self::Factorized { qsr, .. } => Some(qsr),
            Self::NotFactorizable { .. } => None,
        }
    }
}

/// Tests whether `sr` has the form `W = Π q` and, if so, builds the
/// representation with `Π⁽ⁱ⁾(ω) = Θ̃⁽ⁱ⁾({ω}) / ν̃⁽ⁱ⁾({ω})` normalized so its
/// largest-magnitude entry is real positive.
///
/// Errors only when `sr` itself violates its orthonormality relations.
pub fn factorize(sr: &StochasticRealization, tol: &Tolerances) -> Result<Factorization> {
    let inv = sr_invariants(sr);
    let atoms = sr.dims().len();
    let dim_s = sr.dim_s();
    let mut pi = Vec::with_capacity(sr.channels().len());
    let mut q_factors: ScalarTable = sr.q_table().clone();
    for (i, &(_, k)) in sr.channels().iter().enumerate() {
        let mut row = Vec::with_capacity(atoms);
        for atom in 0..atoms {
            let ops: Vec<&ComplexMatrix> = (0..k).flat_map(|kk| sr.w(i, kk, atom)).collect();
            let scale = ops.iter().map(|m| max_abs(m)).fold(0.0, f64::max);
            if scale <= tol.identity {
                row.push(ComplexMatrix::zeros(dim_s, dim_s));
                for kk in 0..k {
                    q_factors[i][kk][atom].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                }
                continue;
            }
            if !rank_one(&ops, tol.identity) {
                return Ok(Factorization::NotFactorizable { channel: i, atom });
            }
            let mass = inv.set.channel_measures[i][atom];
            if mass <= tol.zero_probability {
                return Ok(Factorization::NotFactorizable { channel: i, atom });
            }
            let raw = &inv.set.channel_operators[i][atom] * Complex64::new(1.0 / mass, 0.0);
            let (fixed, factor) = fix_phase(&raw);
            let mut residual: f64 = 0.0;
            for kk in 0..k {
                for (q, w) in q_factors[i][kk][atom].iter_mut().zip(sr.w(i, kk, atom)) {
                    *q *= factor.conj();
                    residual = residual.max(max_abs_diff(w, &(&fixed * *q)));
                }
            }
            if residual > tol.identity * scale.max(1.0) {
                return Ok(Factorization::NotFactorizable { channel: i, atom });
            }
            row.push(fixed);
        }
        pi.push(row);
    }
    let densities = ChannelDensities::from_table(&q_factors, sr.channels(), sr.nu());
    let qsr = QuantumStochasticRep::new(
        dim_s,
        sr.channels().to_vec(),
        sr.nu().clone(),
        pi,
        densities.pairwise,
        tol,
    )?;
    Ok(Factorization::Factorized { qsr, q_factors })
}

/// Factorizes the stochastic realization of the invariant-mode dilation of
/// `t`. Succeeds when every atom of `t` carries at most one Kraus operator.
pub fn qsr_from_instrument(t: &KrausInstrument, tol: &Tolerances) -> Result<Factorization> {
    let g = dilate(t, DilationMode::Invariant)?;
    factorize(&from_realization(&g)?, tol)
}

/// Whether the operators span at most one dimension: the second singular
/// value of the stacked vectorizations is at most `rel` times the first.
fn rank_one(ops: &[&ComplexMatrix], rel: f64) -> bool {
    if ops.len() < 2 {
        return true;
    }
    let len = ops[0].len();
    let stacked = ComplexMatrix::from_fn(len, ops.len(), |r, c| ops[c][(r / ops[c].ncols(), r % ops[c].ncols())]);
    let mut sv: Vec<f64> = stacked.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.get(1).is_none_or(|&s2| s2 <= rel * sv[0])
}

/// Rebuilds `sr` with every `(i, k)` as its own channel and the scalar
/// table `q_c(ω)_n = e^{2πi c m(ω)/M} / √(M ν̃(ω) Ñ(ω))`, where `m(ω)` is
/// the position of ω among the `M` support atoms. The operator table and
/// the instrument are unchanged; when every `Ñ(ω) ≤ 1` the result
/// factorizes.
pub fn split_channels(sr: &StochasticRealization) -> Result<StochasticRealization> {
    let support = sr.nu().support();
    let m = support.len();
    let flat: Vec<(usize, usize)> = sr
        .channels()
        .iter()
        .enumerate()
        .flat_map(|(i, &(_, k))| (0..k).map(move |kk| (i, kk)))
        .collect();
    if flat.len() > m {
        return Err(Error::DimensionMismatch(format!(
            "{} channels need at least as many support atoms, found {m}",
            flat.len()
        )));
    }
    let atoms = sr.dims().len();
    let mut channels = Vec::with_capacity(flat.len());
    let mut q = Vec::with_capacity(flat.len());
    let mut w = Vec::with_capacity(flat.len());
    for (c, &(i, kk)) in flat.iter().enumerate() {
        channels.push((sr.channels()[i].0, 1));
        let mut row = vec![Vec::new(); atoms];
        for (pos, &atom) in support.iter().enumerate() {
            let n = sr.dims()[atom];
            let amp = 1.0 / (m as f64 * sr.nu().weight(atom) * n as f64).sqrt();
            let f = Complex64::from_polar(amp, std::f64::consts::TAU * (c * pos) as f64 / m as f64);
            row[atom] = vec![f; n];
        }
        q.push(vec![row]);
        w.push(vec![sr.w_table()[i][kk].clone()]);
    }
    StochasticRealization::from_parts(sr.dim_s(), channels, sr.nu().clone(), q, w)
}
