//! Stochastic realizations `{β, q·ν, W}` of instruments, their gauge
//! transforms and invariants, and factorization into quantum stochastic
//! representations.

mod factorize;
mod invariants;
mod transform;

pub use factorize::{
    factorize, split_channels, qsr_from_instrument, qsr_instrument, Factorization, QuantumStochasticRep,
};
pub use invariants::{equivalent, sr_invariants, ChannelDensities, SrInvariants};
pub use transform::{apply_transform, Transform};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::qcore::{ComplexMatrix, FiniteMeasure, OutcomeSpace};
use crate::realization::{
    canonicalize, extract_vq, operator_orthonormality, scalar_orthonormality, OperatorTable,
    ScalarTable, StatisticalRealization,
};
use crate::Tolerances;

/// Weights `(β⁽ⁱ⁾, k⁽ⁱ⁾)`, base measure `ν̃`, scalar table `q` and operator
/// table `W`, both indexed `[i][k][ω][n]` with `n < Ñ(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticRealization {
    dim_s: usize,
    channels: Vec<(f64, usize)>,
    nu: FiniteMeasure,
    dims: Vec<usize>,
    q: ScalarTable,
    w: OperatorTable,
}

impl StochasticRealization {
    /// Validates shapes, weights and both orthonormality relations.
    pub fn new(
        dim_s: usize,
        channels: Vec<(f64, usize)>,
        nu: FiniteMeasure,
        q: ScalarTable,
        w: OperatorTable,
        tol: &Tolerances,
    ) -> Result<Self> {
        let sr = Self::from_parts(dim_s, channels, nu, q, w)?;
        let (scalar, operator) = sr.orthonormality_deviations();
        if scalar > tol.identity {
            return Err(Error::NotOrthonormal(format!("scalar family deviates by {scalar:.3e}")));
        }
        if operator > tol.identity {
            return Err(Error::NotOrthonormal(format!("operator family deviates by {operator:.3e}")));
        }
        Ok(sr)
    }

    /// Shape and weight checks only.
    pub(crate) fn from_parts(
        dim_s: usize,
        channels: Vec<(f64, usize)>,
        nu: FiniteMeasure,
        q: ScalarTable,
        w: OperatorTable,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::WeightMismatch("no channels".into()));
        }
        if let Some(&(b, k)) = channels.iter().find(|&&(b, k)| !(b > 0.0) || k == 0) {
            return Err(Error::WeightMismatch(format!("channel ({b}, {k}) needs β > 0 and k ≥ 1")));
        }
        let total: f64 = channels.iter().map(|&(b, k)| b * k as f64).sum();
        if (total - 1.0).abs() > Tolerances::default().identity {
            return Err(Error::WeightMismatch(format!("Σ β k = {total}")));
        }
        let atoms = nu.space().len();
        if q.len() != channels.len() || w.len() != channels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channels, {} scalar and {} operator tables",
                channels.len(),
                q.len(),
                w.len()
            )));
        }
        let dims: Vec<usize> = (0..atoms)
            .map(|a| q[0].first().and_then(|t| t.get(a)).map_or(0, Vec::len))
            .collect();
        for (i, &(_, k)) in channels.iter().enumerate() {
            if q[i].len() != k || w[i].len() != k {
                return Err(Error::DimensionMismatch(format!("channel {i} needs {k} table rows")));
            }
            for kk in 0..k {
                if q[i][kk].len() != atoms || w[i][kk].len() != atoms {
                    return Err(Error::DimensionMismatch(format!(
                        "channel {i} row {kk} does not cover {atoms} atoms"
                    )));
                }
                for atom in 0..atoms {
                    if q[i][kk][atom].len() != dims[atom] || w[i][kk][atom].len() != dims[atom] {
                        return Err(Error::DimensionMismatch(format!(
                            "channel {i} row {kk} has inconsistent block size at atom `{}`",
                            nu.space().label(atom)
                        )));
                    }
                    if let Some(m) = w[i][kk][atom].iter().find(|m| m.shape() != (dim_s, dim_s)) {
                        return Err(Error::DimensionMismatch(format!(
                            "operator of shape {:?} on a {dim_s}-dimensional system",
                            m.shape()
                        )));
                    }
                }
            }
        }
        if let Some(atom) = (0..atoms).find(|&a| (nu.weight(a) > 0.0) != (dims[a] > 0)) {
            return Err(Error::UnsupportedMeasure(format!(
                "block size at `{}` does not match the base measure",
                nu.space().label(atom)
            )));
        }
        Ok(Self {
            dim_s,
            channels,
            nu,
            dims,
            q,
            w,
        })
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn space(&self) -> &OutcomeSpace {
        self.nu.space()
    }

    /// `(β⁽ⁱ⁾, k⁽ⁱ⁾)` per channel.
    pub fn channels(&self) -> &[(f64, usize)] {
        &self.channels
    }

    pub fn nu(&self) -> &FiniteMeasure {
        &self.nu
    }

    /// `Ñ(ω)`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn q(&self, i: usize, k: usize, atom: usize) -> &[Complex64] {
        &self.q[i][k][atom]
    }

    pub fn w(&self, i: usize, k: usize, atom: usize) -> &[ComplexMatrix] {
        &self.w[i][k][atom]
    }

    pub fn q_table(&self) -> &ScalarTable {
        &self.q
    }

    pub fn w_table(&self) -> &OperatorTable {
        &self.w
    }

    /// Deviations of the scalar and operator orthonormality relations.
    pub fn orthonormality_deviations(&self) -> (f64, f64) {
        (
            scalar_orthonormality(&self.q, &self.channels, &self.nu),
            operator_orthonormality(&self.w, &self.channels, &self.nu),
        )
    }

    /// Kraus form: atom ω carries `√(β⁽ⁱ⁾ ν̃(ω)) W[i][k][n](ω)`.
    pub fn instrument(&self) -> KrausInstrument {
        let kraus = (0..self.dims.len())
            .map(|atom| {
                let nu = self.nu.weight(atom);
                let mut list = Vec::new();
                for (i, &(beta, k)) in self.channels.iter().enumerate() {
                    let scale = Complex64::new((beta * nu).sqrt(), 0.0);
                    for kk in 0..k {
                        list.extend(self.w[i][kk][atom].iter().map(|w| w * scale));
                    }
                }
                list
            })
            .collect();
        KrausInstrument::new(self.space().clone(), self.dim_s, kraus)
            .expect("shapes checked at construction")
    }

    /// Channels reordered by `order` (a permutation of channel indices).
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.channels.len()];
        if order.len() != seen.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::DimensionMismatch(format!("{order:?} is not a channel permutation")));
        }
        Ok(Self {
            dim_s: self.dim_s,
            channels: order.iter().map(|&i| self.channels[i]).collect(),
            nu: self.nu.clone(),
            dims: self.dims.clone(),
            q: order.iter().map(|&i| self.q[i].clone()).collect(),
            w: order.iter().map(|&i| self.w[i].clone()).collect(),
        })
    }
}

/// Stochastic realization induced by `g` under the default canonical form.
pub fn from_realization(g: &StatisticalRealization) -> Result<StochasticRealization> {
    from_realization_with(g, None)
}

/// [`from_realization`] with an explicit base measure.
pub fn from_realization_with(
    g: &StatisticalRealization,
    nu: Option<&FiniteMeasure>,
) -> Result<StochasticRealization> {
    let tol = Tolerances::default();
    let cf = canonicalize(g, nu)?;
    let (nu, channels, q, w) = extract_vq(g, &cf, &tol)?.into_tables();
    StochasticRealization::from_parts(g.dim_s(), channels, nu, q, w)
}

/// [`StochasticRealization::instrument`] with the orthonormality check.
pub fn instrument_of_sr(sr: &StochasticRealization, tol: &Tolerances) -> Result<KrausInstrument> {
    let (scalar, operator) = sr.orthonormality_deviations();
    if scalar > tol.identity || operator > tol.identity {
        return Err(Error::NotOrthonormal(format!(
            "scalar deviation {scalar:.3e}, operator deviation {operator:.3e}"
        )));
    }
    Ok(sr.instrument())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{identity, r};

    #[test]
    fn unchecked_tables_are_rejected_by_instrument_of_sr() {
        let space = OutcomeSpace::indexed(2).unwrap();
        let sr = StochasticRealization::from_parts(
            2,
            vec![(1.0, 1)],
            FiniteMeasure::counting(&space),
            vec![vec![vec![vec![r(1.0)], vec![r(1.0)]]]],
            vec![vec![vec![vec![identity(2)], vec![identity(2)]]]],
        )
        .unwrap();
        assert!(matches!(instrument_of_sr(&sr, &Tolerances::default()), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn block_sizes_must_follow_the_base_measure() {
        let space = OutcomeSpace::indexed(2).unwrap();
        let nu = FiniteMeasure::counting_on(&space, &[0]).unwrap();
        let result = StochasticRealization::from_parts(
            1,
            vec![(1.0, 1)],
            nu,
            vec![vec![vec![vec![r(1.0)], vec![r(1.0)]]]],
            vec![vec![vec![vec![identity(1)], vec![identity(1)]]]],
        );
        assert!(matches!(result, Err(Error::UnsupportedMeasure(_))));
    }

    #[test]
    fn reordering_needs_a_permutation() {
        let space = OutcomeSpace::indexed(1).unwrap();
        let sr = StochasticRealization::from_parts(
            1,
            vec![(1.0, 1)],
            FiniteMeasure::counting(&space),
            vec![vec![vec![vec![r(1.0)]]]],
            vec![vec![vec![vec![identity(1)]]]],
        )
        .unwrap();
        assert!(sr.reordered(&[0]).is_ok());
        assert!(sr.reordered(&[1]).is_err());
        assert!(sr.reordered(&[0, 0]).is_err());
    }
}
