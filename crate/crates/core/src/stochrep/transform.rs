use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{identity, isometry_deviation, ComplexMatrix, FiniteMeasure};
use crate::stochrep::StochasticRealization;

const UNITARY_TOL: f64 = 1e-9;

/// Gauge transform of a stochastic realization.
///
/// `z[ω]` mixes the block index `n`, `j[i]` mixes the multiplicity index
/// `k` of channel `i`, `phase` multiplies every operator and `new_base`
/// replaces the base measure by an equivalent one. When `independent` is
/// set, its `(z, j)` pair acts on the operator table while `z`, `j` act on
/// the scalar table; this wider gauge keeps the instrument but in general
/// not the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub z: Vec<ComplexMatrix>,
    pub j: Vec<ComplexMatrix>,
    pub phase: f64,
    pub new_base: Option<FiniteMeasure>,
    pub independent: Option<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)>,
}

impl Transform {
    /// The trivial transform for `sr`.
    pub fn identity(sr: &StochasticRealization) -> Self {
        Self {
            z: sr.dims().iter().map(|&n| identity(n)).collect(),
            j: sr.channels().iter().map(|&(_, k)| identity(k)).collect(),
            phase: 0.0,
            new_base: None,
            independent: None,
        }
    }
}

fn check_family(sr: &StochasticRealization, z: &[ComplexMatrix], j: &[ComplexMatrix]) -> Result<()> {
    if z.len() != sr.dims().len() || j.len() != sr.channels().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} atom and {} channel matrices for {} atoms and {} channels",
            z.len(),
            j.len(),
            sr.dims().len(),
            sr.channels().len()
        )));
    }
    let sizes = sr.dims().iter().zip(z).chain(sr.channels().iter().map(|(_, k)| k).zip(j));
    for (&n, m) in sizes {
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "gauge matrix of shape {:?} where {n}x{n} is required",
                m.shape()
            )));
        }
        if n > 0 {
            let deviation = isometry_deviation(m).max(isometry_deviation(&m.adjoint()));
            if deviation > UNITARY_TOL {
                return Err(Error::NotUnitaryMatrix(format!("deviation {deviation:.3e}")));
            }
        }
    }
    Ok(())
}

/// `out[i][k][ω][n] = Σ_{p,m} J⁽ⁱ⁾_kp z_nm(ω) x[i][p][ω][m] · s(ω)`.
fn mix<T, F>(
    table: &[Vec<Vec<Vec<T>>>],
    z: &[ComplexMatrix],
    j: &[ComplexMatrix],
    scale: &[f64],
    zero: T,
    mut axpy: F,
) -> Vec<Vec<Vec<Vec<T>>>>
where
    T: Clone,
    F: FnMut(&mut T, Complex64, &T),
{
    table
        .iter()
        .zip(j)
        .map(|(rows, jm)| {
            (0..rows.len())
                .map(|k| {
                    (0..z.len())
                        .map(|atom| {
                            let zm = &z[atom];
                            (0..zm.nrows())
                                .map(|n| {
                                    let mut acc = zero.clone();
                                    for (p, row) in rows.iter().enumerate() {
                                        for (m, x) in row[atom].iter().enumerate() {
                                            let coef = jm[(k, p)] * zm[(n, m)] * scale[atom];
                                            axpy(&mut acc, coef, x);
                                        }
                                    }
                                    acc
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Applies `t` to `sr`. Both tables pick up the Jacobian `√(dν̃/dν̃′)`;
/// the operators additionally pick up `e^{i·phase}`.
pub fn apply_transform(sr: &StochasticRealization, t: &Transform) -> Result<StochasticRealization> {
    check_family(sr, &t.z, &t.j)?;
    let (wz, wj) = match &t.independent {
        Some((wz, wj)) => {
            check_family(sr, wz, wj)?;
            (wz.as_slice(), wj.as_slice())
        }
        None => (t.z.as_slice(), t.j.as_slice()),
    };
    let nu = t.new_base.clone().unwrap_or_else(|| sr.nu().clone());
    sr.space().ensure_same(nu.space())?;
    let old = sr.nu();
    if let Some(atom) = (0..old.space().len()).find(|&a| (old.weight(a) > 0.0) != (nu.weight(a) > 0.0)) {
        return Err(Error::NotAbsolutelyContinuous {
            atom: old.space().label(atom).to_string(),
        });
    }
    let scale: Vec<f64> = (0..old.space().len())
        .map(|a| if nu.weight(a) > 0.0 { (old.weight(a) / nu.weight(a)).sqrt() } else { 0.0 })
        .collect();

    let q = mix(sr.q_table(), &t.z, &t.j, &scale, Complex64::new(0.0, 0.0), |acc, c, x| {
        *acc += c * x
    });
    let phase = Complex64::from_polar(1.0, t.phase);
    let zero = ComplexMatrix::zeros(sr.dim_s(), sr.dim_s());
    let w = mix(sr.w_table(), wz, wj, &scale, zero, |acc, c, x| *acc += x * (c * phase));
    StochasticRealization::from_parts(sr.dim_s(), sr.channels().to_vec(), nu, q, w)
}
