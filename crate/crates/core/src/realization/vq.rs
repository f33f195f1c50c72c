use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::qcore::{
    identity, max_abs, spectral_decompose, ComplexMatrix, ComplexVector, FiniteMeasure,
    OutcomeSpace,
};
use crate::realization::{partial_element, CanonicalForm, StatisticalRealization};
use crate::Tolerances;

/// Operator table indexed `[i][k][ω][n]`.
pub type OperatorTable = Vec<Vec<Vec<Vec<ComplexMatrix>>>>;
/// Scalar table indexed `[i][k][ω][n]`.
pub type ScalarTable = Vec<Vec<Vec<Vec<Complex64>>>>;

/// Operator and scalar tables of a realization, indexed by eigenvalue
/// cluster `i`, eigenvector `k` within the cluster, atom `ω` and block
/// index `n < N(ω)`.
///
/// With `φ_ik` the ancilla eigenvectors and `e_n(ω)` the block basis,
/// `V = ⟨e_n(ω)|U|φ_ik⟩/√ν(ω)` and `q = ⟨e_n(ω), φ_ik⟩/√ν(ω)`. The
/// `1/√ν` scaling makes both families orthonormal in `L²(ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VQFamily {
    nu: FiniteMeasure,
    dims: Vec<usize>,
    channels: Vec<(f64, usize)>,
    v: OperatorTable,
    q: ScalarTable,
}

impl VQFamily {
    pub fn nu(&self) -> &FiniteMeasure {
        &self.nu
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `(α⁽ⁱ⁾, k(α⁽ⁱ⁾))`, descending in α.
    pub fn channels(&self) -> &[(f64, usize)] {
        &self.channels
    }

    /// `V[i][k][n](ω)` for `n < N(ω)`.
    pub fn v(&self, i: usize, k: usize, atom: usize) -> &[ComplexMatrix] {
        &self.v[i][k][atom]
    }

    /// `q[i][k][n](ω)` for `n < N(ω)`.
    pub fn q(&self, i: usize, k: usize, atom: usize) -> &[Complex64] {
        &self.q[i][k][atom]
    }

    pub(crate) fn into_tables(self) -> (FiniteMeasure, Vec<(f64, usize)>, ScalarTable, OperatorTable) {
        (self.nu, self.channels, self.q, self.v)
    }

    fn dim_s(&self) -> usize {
        table_dim(&self.v)
    }

    fn flat_indices(&self) -> Vec<(usize, usize)> {
        flat_indices(&self.channels)
    }

    /// `max |Σ_ω Σ_n V[j][p][n]† V[i][k][n] ν(ω) − δ I|` over all index pairs.
    pub fn operator_orthonormality_deviation(&self) -> f64 {
        operator_orthonormality(&self.v, &self.channels, &self.nu)
    }

    /// `max |Σ_ω Σ_n q[j][p][n]* q[i][k][n] ν(ω) − δ|` over all index pairs.
    pub fn scalar_orthonormality_deviation(&self) -> f64 {
        scalar_orthonormality(&self.q, &self.channels, &self.nu)
    }

    /// Norm bound of the operator family for a vector `ψ`.
    ///
    /// Returns the largest excess of `Σ_ω ‖V[i][k][n](ω)ψ‖² ν(ω)` over
    /// `‖ψ‖²` for fixed `(i, k, n)` (should be ≤ 0) and the largest
    /// deviation of the same sum taken over `n` as well from `‖ψ‖²`.
    pub fn norm_bound(&self, psi: &ComplexVector) -> (f64, f64) {
        let norm2 = psi.norm_squared();
        let mut excess = f64::NEG_INFINITY;
        let mut deviation: f64 = 0.0;
        for (i, k) in self.flat_indices() {
            let max_n = self.dims.iter().copied().max().unwrap_or(0);
            let mut total = 0.0;
            for n in 0..max_n {
                let mut sum = 0.0;
                for atom in 0..self.dims.len() {
                    if let Some(v) = self.v[i][k][atom].get(n) {
                        sum += (v * psi).norm_squared() * self.nu.weight(atom);
                    }
                }
                excess = excess.max(sum - norm2);
                total += sum;
            }
            deviation = deviation.max((total - norm2).abs());
        }
        (excess, deviation)
    }

    /// Kraus form: atom ω carries `√(α⁽ⁱ⁾ ν(ω)) V[i][k][n](ω)`.
    pub fn instrument(&self, space: OutcomeSpace, dim_s: usize) -> KrausInstrument {
        let kraus = (0..self.dims.len())
            .map(|atom| {
                let nu = self.nu.weight(atom);
                let mut list = Vec::new();
                for (i, &(alpha, k)) in self.channels.iter().enumerate() {
                    let scale = Complex64::new((alpha * nu).sqrt(), 0.0);
                    for kk in 0..k {
                        list.extend(self.v[i][kk][atom].iter().map(|v| v * scale));
                    }
                }
                list
            })
            .collect();
        KrausInstrument::new(space, dim_s, kraus).expect("shapes fixed by construction")
    }

    /// `ν⁽ⁱ⁾({ω}) = k⁻¹ Σ_k Σ_n |q|² ν(ω)`.
    pub fn channel_measure(&self, i: usize, atom: usize) -> f64 {
        let k = self.channels[i].1;
        let nu = self.nu.weight(atom);
        (0..k)
            .map(|kk| self.q[i][kk][atom].iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * nu
            / k as f64
    }

    /// `Θ⁽ⁱ⁾({ω}) = k⁻¹ Σ_k Σ_n V q* ν(ω)`.
    pub fn theta(&self, i: usize, atom: usize) -> ComplexMatrix {
        let dim = self.dim_s();
        let k = self.channels[i].1;
        let w = Complex64::new(self.nu.weight(atom) / k as f64, 0.0);
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for kk in 0..k {
            for (v, q) in self.v[i][kk][atom].iter().zip(&self.q[i][kk][atom]) {
                acc += v * (q.conj() * w);
            }
        }
        acc
    }
}

/// Extracts the operator and scalar tables of `g` relative to `cf`.
///
/// Eigenvalue clusters of the ancilla state at or below `tol.cluster` are
/// dropped: they carry no weight in the instrument.
pub fn extract_vq(g: &StatisticalRealization, cf: &CanonicalForm, tol: &Tolerances) -> Result<VQFamily> {
    let atoms = g.space().len();
    if cf.dims().len() != atoms {
        return Err(Error::DimensionMismatch(format!(
            "canonical form has {} atoms, realization has {atoms}",
            cf.dims().len()
        )));
    }
    let clusters = spectral_decompose(g.state().matrix(), tol.cluster)?;
    let u = g.unitary().matrix();
    let dim_s = g.dim_s();

    let mut channels = Vec::new();
    let mut v = Vec::new();
    let mut q = Vec::new();
    for cluster in clusters.into_iter().filter(|c| c.value > tol.cluster) {
        channels.push((cluster.value, cluster.multiplicity));
        let mut v_i = Vec::with_capacity(cluster.multiplicity);
        let mut q_i = Vec::with_capacity(cluster.multiplicity);
        for phi in cluster.vectors.column_iter() {
            let phi: ComplexVector = phi.into_owned();
            let mut v_ik = Vec::with_capacity(atoms);
            let mut q_ik = Vec::with_capacity(atoms);
            for atom in 0..atoms {
                let nu = cf.nu().weight(atom);
                let scale = if nu > 0.0 { 1.0 / nu.sqrt() } else { 0.0 };
                let basis = cf.block_basis(atom);
                v_ik.push(
                    basis
                        .iter()
                        .map(|e| partial_element(u, dim_s, e, &phi) * Complex64::new(scale, 0.0))
                        .collect(),
                );
                q_ik.push(basis.iter().map(|e| e.dotc(&phi) * scale).collect());
            }
            v_i.push(v_ik);
            q_i.push(q_ik);
        }
        v.push(v_i);
        q.push(q_i);
    }
    Ok(VQFamily {
        nu: cf.nu().clone(),
        dims: cf.dims().to_vec(),
        channels,
        v,
        q,
    })
}

pub(crate) fn table_dim(v: &OperatorTable) -> usize {
    v.iter().flatten().flatten().flatten().next().map_or(1, |m| m.nrows())
}

pub(crate) fn flat_indices(channels: &[(f64, usize)]) -> Vec<(usize, usize)> {
    channels
        .iter()
        .enumerate()
        .flat_map(|(i, &(_, k))| (0..k).map(move |kk| (i, kk)))
        .collect()
}

/// Largest deviation of `Σ_ω Σ_n V[j][p][n]† V[i][k][n] ν(ω)` from `δ I`.
pub(crate) fn operator_orthonormality(v: &OperatorTable, channels: &[(f64, usize)], nu: &FiniteMeasure) -> f64 {
    let dim = table_dim(v);
    let idx = flat_indices(channels);
    let atoms = nu.space().len();
    let mut worst: f64 = 0.0;
    for (a, &(j, p)) in idx.iter().enumerate() {
        for (b, &(i, k)) in idx.iter().enumerate().skip(a) {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for atom in 0..atoms {
                let w = Complex64::new(nu.weight(atom), 0.0);
                for (vj, vi) in v[j][p][atom].iter().zip(&v[i][k][atom]) {
                    acc += vj.adjoint() * vi * w;
                }
            }
            if a == b {
                acc -= identity(dim);
            }
            worst = worst.max(max_abs(&acc));
        }
    }
    worst
}

/// Largest deviation of `Σ_ω Σ_n q[j][p][n]* q[i][k][n] ν(ω)` from `δ`.
pub(crate) fn scalar_orthonormality(q: &ScalarTable, channels: &[(f64, usize)], nu: &FiniteMeasure) -> f64 {
    let idx = flat_indices(channels);
    let atoms = nu.space().len();
    let mut worst: f64 = 0.0;
    for (a, &(j, p)) in idx.iter().enumerate() {
        for (b, &(i, k)) in idx.iter().enumerate().skip(a) {
            let mut acc = Complex64::new(0.0, 0.0);
            for atom in 0..atoms {
                for (qj, qi) in q[j][p][atom].iter().zip(&q[i][k][atom]) {
                    acc += qj.conj() * qi * nu.weight(atom);
                }
            }
            if a == b {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}
