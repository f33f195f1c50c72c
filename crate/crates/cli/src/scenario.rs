//! JSON scenario files: the serde schema, decoding into validated library
//! values and encoding library values back into the schema.
//!
//! Complex scalars are `[re, im]` pairs, matrices are arrays of row arrays
//! and measures are `label → weight` objects. Exactly one payload key among
//! `instrument`, `realization`, `stochastic_realization` and `model` must be
//! present.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use qsa_core::instrument::KrausInstrument;
use qsa_core::qcore::{
    ComplexMatrix, ComplexVector, DensityOperator, FiniteMeasure, OutcomeSpace, ProjectionValuedMeasure,
    UnitaryOperator,
};
use qsa_core::qsa::{InitialState, MeasurementModel};
use qsa_core::realization::StatisticalRealization;
use qsa_core::stochrep::{qsr_from_instrument, Factorization, QuantumStochasticRep, StochasticRealization};
use qsa_core::Tolerances;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub type ComplexJson = [f64; 2];
pub type VectorJson = Vec<ComplexJson>;
pub type MatrixJson = Vec<Vec<ComplexJson>>;
/// Kraus lists in outcome order.
pub type InstrumentJson = Vec<Vec<MatrixJson>>;
pub type MeasureJson = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dim_s: usize,
    pub outcomes: Vec<String>,
    /// Base measure; the counting measure on all outcomes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<RealizationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic_realization: Option<StochasticJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_with: Option<CompareJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub von_neumann: Option<VonNeumannJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<TolJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsJson>,
}

/// Ancilla state, PVM (one projection per outcome) and coupling unitary on
/// `system ⊗ ancilla`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationJson {
    pub state: MatrixJson,
    pub pvm: Vec<MatrixJson>,
    pub unitary: MatrixJson,
}

/// Channel weights `(β, k)` and tables indexed `[i][k][outcome][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticJson {
    pub channels: Vec<(f64, usize)>,
    pub q: Vec<Vec<Vec<VectorJson>>>,
    pub w: Vec<Vec<Vec<Vec<MatrixJson>>>>,
}

/// Channel weights `(α, k)`, operators indexed `[i][outcome]` and densities
/// indexed `[j][i][outcome]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsrJson {
    pub channels: Vec<(f64, usize)>,
    pub pi: Vec<Vec<MatrixJson>>,
    pub densities: Vec<Vec<VectorJson>>,
}

/// A representation (explicit `qsr`, or an `instrument` factorized through
/// its invariant dilation) with a pure `state` or a `density`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qsr: Option<QsrJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<VectorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixJson>,
}

/// Second operand of `compare`, sharing `dim_s` and `outcomes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<RealizationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic_realization: Option<StochasticJson>,
}

/// Input of the `von-neumann` command. `eta` defaults to the first pointer
/// and `pointers` to the coordinate basis of a `#outcomes`-dimensional
/// ancilla.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VonNeumannJson {
    pub state: VectorJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<VectorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointers: Option<Vec<VectorJson>>,
}

/// Tolerance overrides; missing keys take the library defaults
/// (`identity` 1e-9, `cluster` 1e-8, `psd_floor` 1e-9,
/// `zero_probability` 1e-12).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_probability: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

/// Validated library value carried by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Instrument(KrausInstrument),
    Realization(StatisticalRealization),
    Stochastic(StochasticRealization),
    Model(MeasurementModel),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Instrument(_) => "instrument",
            Payload::Realization(_) => "realization",
            Payload::Stochastic(_) => "stochastic_realization",
            Payload::Model(_) => "model",
        }
    }

    /// The instrument the payload describes.
    pub fn instrument(&self) -> qsa_core::Result<KrausInstrument> {
        match self {
            Payload::Instrument(t) => Ok(t.clone()),
            Payload::Realization(g) => g.instrument(),
            Payload::Stochastic(sr) => Ok(sr.instrument()),
            Payload::Model(m) => Ok(m.qsr().instrument()),
        }
    }
}

/// A parsed and validated scenario. `file` keeps the document exactly as
/// read so it can be written back unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub space: OutcomeSpace,
    pub tol: Tolerances,
    pub payload: Payload,
    pub compare_with: Option<Payload>,
}

impl Scenario {
    /// JSON of the underlying document, laid out by [`render`].
    pub fn serialize(&self) -> String {
        render(&serde_json::to_value(&self.file).expect("scenario documents always serialize"))
    }

    pub fn params(&self) -> ParamsJson {
        self.file.params.clone().unwrap_or_default()
    }
}

/// Depth of nested scalar arrays (`1` for `[re, im]`, `2` for a vector or
/// matrix row); `None` when the value holds an object.
fn numeric_depth(v: &Value) -> Option<usize> {
    match v {
        Value::Object(_) => None,
        Value::Array(items) => items
            .iter()
            .try_fold(0, |d, x| numeric_depth(x).map(|e| d.max(e)))
            .map(|d| d + 1),
        _ => Some(0),
    }
}

/// Indented JSON that keeps vectors and matrix rows on one line. Numbers
/// are printed in shortest round-trip form.
pub fn render(value: &Value) -> String {
    fn go(v: &Value, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent + 1);
        match v {
            Value::Array(items) if !items.is_empty() && numeric_depth(v).is_none_or(|d| d > 2) => {
                out.push_str("[\n");
                for (n, x) in items.iter().enumerate() {
                    out.push_str(&pad);
                    go(x, indent + 1, out);
                    out.push_str(if n + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Value::Object(map) if !map.is_empty() => {
                out.push_str("{\n");
                for (n, (k, x)) in map.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&Value::String(k.clone()).to_string());
                    out.push_str(": ");
                    go(x, indent + 1, out);
                    out.push_str(if n + 1 < map.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(Value::to_string).collect();
                out.push('[');
                out.push_str(&parts.join(", "));
                out.push(']');
            }
            other => out.push_str(&other.to_string()),
        }
    }
    let mut out = String::new();
    go(value, 0, &mut out);
    out
}

/// Hex SHA-256 of the raw input bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads, parses and validates a scenario file. Returns the scenario and the
/// digest of the file contents. `identity_tol` overrides `tol.identity`.
pub fn load(path: &Path, identity_tol: Option<f64>) -> Result<(Scenario, String), CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::parse("<file>", e.to_string()))?;
    Ok((parse_str(text, identity_tol)?, digest(&bytes)))
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    load(path, None).map(|(s, _)| s)
}

pub fn parse_str(text: &str, identity_tol: Option<f64>) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::parse(path, format!("{inner} (line {}, column {})", inner.line(), inner.column()))
    })?;
    from_file(file, identity_tol)
}

/// Validates a document and builds the library values.
pub fn from_file(file: ScenarioFile, identity_tol: Option<f64>) -> Result<Scenario, CliError> {
    let tol = tolerances(file.tol.as_ref(), identity_tol)?;
    if file.dim_s == 0 {
        return Err(CliError::parse("dim_s", "system dimension must be positive"));
    }
    let space = OutcomeSpace::new(file.outcomes.iter().map(String::as_str))
        .map_err(|e| CliError::validation("outcomes", e))?;
    let ctx = Decoder {
        dim_s: file.dim_s,
        space: space.clone(),
        tol,
    };

    let present: Vec<&str> = [
        ("instrument", file.instrument.is_some()),
        ("realization", file.realization.is_some()),
        ("stochastic_realization", file.stochastic_realization.is_some()),
        ("model", file.model.is_some()),
    ]
    .into_iter()
    .filter_map(|(k, p)| p.then_some(k))
    .collect();
    if present.len() != 1 {
        return Err(CliError::parse(
            ".",
            format!(
                "exactly one of instrument, realization, stochastic_realization, model is required (found {})",
                if present.is_empty() { "none".to_string() } else { present.join(", ") }
            ),
        ));
    }

    let measure = file.measure.as_ref().map(|m| ctx.measure(m, "measure")).transpose()?;
    let payload = if let Some(t) = &file.instrument {
        Payload::Instrument(ctx.instrument(t, "instrument")?)
    } else if let Some(g) = &file.realization {
        Payload::Realization(ctx.realization(g, "realization")?)
    } else if let Some(sr) = &file.stochastic_realization {
        Payload::Stochastic(ctx.stochastic(sr, measure.as_ref(), "stochastic_realization")?)
    } else {
        let m = file.model.as_ref().expect("one payload is present");
        Payload::Model(ctx.model(m, measure.as_ref(), "model")?)
    };

    let compare_with = match &file.compare_with {
        None => None,
        Some(c) => {
            let measure = c
                .measure
                .as_ref()
                .map(|m| ctx.measure(m, "compare_with.measure"))
                .transpose()?;
            let count = [c.instrument.is_some(), c.realization.is_some(), c.stochastic_realization.is_some()]
                .iter()
                .filter(|&&p| p)
                .count();
            if count != 1 {
                return Err(CliError::parse(
                    "compare_with",
                    "exactly one of instrument, realization, stochastic_realization is required",
                ));
            }
            Some(if let Some(t) = &c.instrument {
                Payload::Instrument(ctx.instrument(t, "compare_with.instrument")?)
            } else if let Some(g) = &c.realization {
                Payload::Realization(ctx.realization(g, "compare_with.realization")?)
            } else {
                let sr = c.stochastic_realization.as_ref().expect("counted above");
                Payload::Stochastic(ctx.stochastic(sr, measure.as_ref(), "compare_with.stochastic_realization")?)
            })
        }
    };
    if let Some(v) = &file.von_neumann {
        ctx.vector(&v.state, "von_neumann.state", file.dim_s)?;
    }

    Ok(Scenario {
        file,
        space,
        tol,
        payload,
        compare_with,
    })
}

fn tolerances(json: Option<&TolJson>, identity_tol: Option<f64>) -> Result<Tolerances, CliError> {
    let defaults = Tolerances::default();
    let json = json.cloned().unwrap_or_default();
    let tol = Tolerances {
        identity: identity_tol.or(json.identity).unwrap_or(defaults.identity),
        cluster: json.cluster.unwrap_or(defaults.cluster),
        psd_floor: json.psd_floor.unwrap_or(defaults.psd_floor),
        zero_probability: json.zero_probability.unwrap_or(defaults.zero_probability),
    };
    for (name, value) in [
        ("identity", tol.identity),
        ("cluster", tol.cluster),
        ("psd_floor", tol.psd_floor),
        ("zero_probability", tol.zero_probability),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(CliError::parse(format!("tol.{name}"), format!("{value} is not a non-negative number")));
        }
    }
    Ok(tol)
}

/// Shape-checked conversion of schema values, with field paths in errors.
pub(crate) struct Decoder {
    pub dim_s: usize,
    pub space: OutcomeSpace,
    pub tol: Tolerances,
}

fn complex(c: &ComplexJson) -> Complex64 {
    Complex64::new(c[0], c[1])
}

impl Decoder {
    pub fn vector(&self, v: &VectorJson, path: &str, len: usize) -> Result<ComplexVector, CliError> {
        if v.len() != len {
            return Err(CliError::parse(path, format!("expected {len} entries, found {}", v.len())));
        }
        Ok(ComplexVector::from_iterator(len, v.iter().map(complex)))
    }

    pub fn matrix(&self, m: &MatrixJson, path: &str, rows: usize, cols: usize) -> Result<ComplexMatrix, CliError> {
        if m.len() != rows {
            return Err(CliError::parse(path, format!("expected {rows}x{cols} matrix, found {} rows", m.len())));
        }
        if let Some((r, row)) = m.iter().enumerate().find(|(_, row)| row.len() != cols) {
            return Err(CliError::parse(
                format!("{path}[{r}]"),
                format!("expected {cols} columns, found {}", row.len()),
            ));
        }
        Ok(ComplexMatrix::from_fn(rows, cols, |r, c| complex(&m[r][c])))
    }

    fn square(&self, m: &MatrixJson, path: &str) -> Result<ComplexMatrix, CliError> {
        self.matrix(m, path, m.len(), m.len())
    }

    fn per_outcome<'a, T>(&self, items: &'a [T], path: &str) -> Result<&'a [T], CliError> {
        if items.len() != self.space.len() {
            return Err(CliError::parse(
                path,
                format!("expected one entry per outcome ({}), found {}", self.space.len(), items.len()),
            ));
        }
        Ok(items)
    }

    pub fn measure(&self, m: &MeasureJson, path: &str) -> Result<FiniteMeasure, CliError> {
        let mut weights = vec![0.0; self.space.len()];
        for (label, &w) in m {
            let atom = self
                .space
                .index_of(label)
                .ok_or_else(|| CliError::parse(format!("{path}.{label}"), "unknown outcome label"))?;
            weights[atom] = w;
        }
        FiniteMeasure::new(self.space.clone(), weights).map_err(|e| CliError::validation(path, e))
    }

    fn kraus_lists(&self, t: &InstrumentJson, path: &str) -> Result<Vec<Vec<ComplexMatrix>>, CliError> {
        self.per_outcome(t, path)?
            .iter()
            .enumerate()
            .map(|(atom, list)| {
                list.iter()
                    .enumerate()
                    .map(|(m, a)| self.matrix(a, &format!("{path}[{atom}][{m}]"), self.dim_s, self.dim_s))
                    .collect()
            })
            .collect()
    }

    pub fn instrument(&self, t: &InstrumentJson, path: &str) -> Result<KrausInstrument, CliError> {
        let lists = self.kraus_lists(t, path)?;
        KrausInstrument::new_validated(self.space.clone(), self.dim_s, lists, &self.tol)
            .map_err(|e| CliError::validation(path, e))
    }

    pub fn realization(&self, g: &RealizationJson, path: &str) -> Result<StatisticalRealization, CliError> {
        let state = self.square(&g.state, &format!("{path}.state"))?;
        let dim_k = state.nrows();
        if dim_k == 0 {
            return Err(CliError::parse(format!("{path}.state"), "ancilla dimension must be positive"));
        }
        let state = DensityOperator::with_tol(state, &self.tol).map_err(|e| CliError::validation(format!("{path}.state"), e))?;
        let projections = self
            .per_outcome(&g.pvm, &format!("{path}.pvm"))?
            .iter()
            .enumerate()
            .map(|(atom, p)| self.matrix(p, &format!("{path}.pvm[{atom}]"), dim_k, dim_k))
            .collect::<Result<Vec<_>, _>>()?;
        let pvm = ProjectionValuedMeasure::with_tol(self.space.clone(), projections, &self.tol)
            .map_err(|e| CliError::validation(format!("{path}.pvm"), e))?;
        let n = self.dim_s * dim_k;
        let u = self.matrix(&g.unitary, &format!("{path}.unitary"), n, n)?;
        let u = UnitaryOperator::with_tol(u, self.tol.identity).map_err(|e| CliError::validation(format!("{path}.unitary"), e))?;
        StatisticalRealization::new(self.dim_s, state, pvm, u).map_err(|e| CliError::validation(path, e))
    }

    pub fn stochastic(
        &self,
        sr: &StochasticJson,
        measure: Option<&FiniteMeasure>,
        path: &str,
    ) -> Result<StochasticRealization, CliError> {
        let nu = measure.cloned().unwrap_or_else(|| FiniteMeasure::counting(&self.space));
        let q = sr
            .q
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|block| block.iter().map(complex).collect()).collect())
                    .collect()
            })
            .collect();
        let w = sr
            .w
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                rows.iter()
                    .enumerate()
                    .map(|(k, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(atom, block)| {
                                block
                                    .iter()
                                    .enumerate()
                                    .map(|(n, m)| {
                                        self.matrix(m, &format!("{path}.w[{i}][{k}][{atom}][{n}]"), self.dim_s, self.dim_s)
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<Vec<Vec<_>>>>, CliError>>()?;
        StochasticRealization::new(self.dim_s, sr.channels.clone(), nu, q, w, &self.tol)
            .map_err(|e| CliError::validation(path, e))
    }

    pub fn qsr(&self, q: &QsrJson, measure: Option<&FiniteMeasure>, path: &str) -> Result<QuantumStochasticRep, CliError> {
        let nu = measure.cloned().unwrap_or_else(|| FiniteMeasure::counting(&self.space));
        let pi = q
            .pi
            .iter()
            .enumerate()
            .map(|(i, row)| {
                self.per_outcome(row, &format!("{path}.pi[{i}]"))?
                    .iter()
                    .enumerate()
                    .map(|(atom, m)| self.matrix(m, &format!("{path}.pi[{i}][{atom}]"), self.dim_s, self.dim_s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let channels = q.channels.len();
        if pi.len() != channels {
            return Err(CliError::parse(format!("{path}.pi"), format!("expected {channels} channel rows, found {}", pi.len())));
        }
        if q.densities.len() != channels {
            return Err(CliError::parse(
                format!("{path}.densities"),
                format!("expected {channels} rows, found {}", q.densities.len()),
            ));
        }
        let densities = q
            .densities
            .iter()
            .enumerate()
            .map(|(j, row)| {
                if row.len() != channels {
                    return Err(CliError::parse(
                        format!("{path}.densities[{j}]"),
                        format!("expected {channels} rows, found {}", row.len()),
                    ));
                }
                row.iter()
                    .enumerate()
                    .map(|(i, v)| self.vector(v, &format!("{path}.densities[{j}][{i}]"), self.space.len()).map(|v| v.iter().copied().collect()))
                    .collect::<Result<Vec<Vec<Complex64>>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        QuantumStochasticRep::new(self.dim_s, q.channels.clone(), nu, pi, densities, &self.tol)
            .map_err(|e| CliError::validation(path, e))
    }

    pub fn model(&self, m: &ModelJson, measure: Option<&FiniteMeasure>, path: &str) -> Result<MeasurementModel, CliError> {
        let qsr = match (&m.qsr, &m.instrument) {
            (Some(q), None) => self.qsr(q, measure, &format!("{path}.qsr"))?,
            (None, Some(t)) => {
                let ipath = format!("{path}.instrument");
                let t = self.instrument(t, &ipath)?;
                match qsr_from_instrument(&t, &self.tol).map_err(|e| CliError::validation(&ipath, e))? {
                    Factorization::Factorized { qsr, .. } => qsr,
                    Factorization::NotFactorizable { channel, atom } => {
                        return Err(CliError::Validation {
                            invariant: "factorizable".into(),
                            path: ipath,
                            message: format!("NotFactorizable at ({channel},{})", self.space.label(atom)),
                        })
                    }
                }
            }
            _ => return Err(CliError::parse(path, "exactly one of qsr, instrument is required")),
        };
        match (&m.state, &m.density) {
            (Some(psi), None) => {
                let spath = format!("{path}.state");
                let psi = self.vector(psi, &spath, self.dim_s)?;
                MeasurementModel::pure(qsr, psi, &self.tol).map_err(|e| CliError::validation(spath, e))
            }
            (None, Some(rho)) => {
                let dpath = format!("{path}.density");
                let rho = self.matrix(rho, &dpath, self.dim_s, self.dim_s)?;
                let rho = DensityOperator::with_tol(rho, &self.tol).map_err(|e| CliError::validation(&dpath, e))?;
                MeasurementModel::mixed(qsr, rho).map_err(|e| CliError::validation(dpath, e))
            }
            _ => Err(CliError::parse(path, "exactly one of state, density is required")),
        }
    }
}

pub fn encode_complex(z: Complex64) -> ComplexJson {
    [z.re, z.im]
}

pub fn encode_vector<'a>(v: impl IntoIterator<Item = &'a Complex64>) -> VectorJson {
    v.into_iter().map(|&z| encode_complex(z)).collect()
}

pub fn encode_matrix(m: &ComplexMatrix) -> MatrixJson {
    m.row_iter().map(|row| row.iter().map(|&z| encode_complex(z)).collect()).collect()
}

pub fn encode_measure(nu: &FiniteMeasure) -> MeasureJson {
    nu.space()
        .labels()
        .iter()
        .zip(nu.weights())
        .filter(|(_, &w)| w != 0.0)
        .map(|(l, &w)| (l.clone(), w))
        .collect()
}

pub fn encode_instrument(t: &KrausInstrument) -> InstrumentJson {
    t.kraus_lists().iter().map(|list| list.iter().map(encode_matrix).collect()).collect()
}

pub fn encode_realization(g: &StatisticalRealization) -> RealizationJson {
    RealizationJson {
        state: encode_matrix(g.state().matrix()),
        pvm: g.pvm().projections().iter().map(encode_matrix).collect(),
        unitary: encode_matrix(g.unitary().matrix()),
    }
}

pub fn encode_stochastic(sr: &StochasticRealization) -> StochasticJson {
    StochasticJson {
        channels: sr.channels().to_vec(),
        q: sr
            .q_table()
            .iter()
            .map(|rows| rows.iter().map(|row| row.iter().map(encode_vector).collect()).collect())
            .collect(),
        w: sr
            .w_table()
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|b| b.iter().map(encode_matrix).collect()).collect())
                    .collect()
            })
            .collect(),
    }
}

pub fn encode_qsr(qsr: &QuantumStochasticRep) -> QsrJson {
    QsrJson {
        channels: qsr.channels().to_vec(),
        pi: qsr.pi_table().iter().map(|row| row.iter().map(encode_matrix).collect()).collect(),
        densities: qsr
            .densities()
            .iter()
            .map(|row| row.iter().map(encode_vector).collect())
            .collect(),
    }
}

/// The `model` section for a measurement model with an explicit
/// representation.
pub fn encode_model(m: &MeasurementModel) -> ModelJson {
    let (state, density) = match m.state() {
        InitialState::Pure(psi) => (Some(encode_vector(psi.iter())), None),
        InitialState::Mixed(rho) => (None, Some(encode_matrix(rho.matrix()))),
    };
    ModelJson {
        qsr: Some(encode_qsr(m.qsr())),
        instrument: None,
        state,
        density,
    }
}

/// A bare document over `space` with no payload set.
pub fn empty_file(dim_s: usize, space: &OutcomeSpace) -> ScenarioFile {
    ScenarioFile {
        dim_s,
        outcomes: space.labels().to_vec(),
        measure: None,
        instrument: None,
        realization: None,
        stochastic_realization: None,
        model: None,
        compare_with: None,
        von_neumann: None,
        tol: None,
        params: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsa_core::fixtures;

    fn ad_file() -> ScenarioFile {
        let t = fixtures::fix_ad();
        ScenarioFile {
            instrument: Some(encode_instrument(&t)),
            ..empty_file(2, t.space())
        }
    }

    #[test]
    fn instrument_round_trip_is_exact() {
        let s = from_file(ad_file(), None).unwrap();
        assert_eq!(s.payload, Payload::Instrument(fixtures::fix_ad()));
        let again = parse_str(&s.serialize(), None).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn two_payloads_are_rejected() {
        let mut file = ad_file();
        file.model = Some(ModelJson {
            qsr: None,
            instrument: file.instrument.clone(),
            state: Some(vec![[1.0, 0.0], [0.0, 0.0]]),
            density: None,
        });
        assert!(matches!(from_file(file, None), Err(CliError::Parse { .. })));
    }

    #[test]
    fn ragged_matrix_names_the_row() {
        let mut file = ad_file();
        file.instrument.as_mut().unwrap()[1][0][1].push([0.0, 0.0]);
        match from_file(file, None) {
            Err(CliError::Parse { path, .. }) => assert_eq!(path, "instrument[1][0][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incomplete_instrument_fails_completeness() {
        let mut file = ad_file();
        file.instrument.as_mut().unwrap()[1].clear();
        assert!(matches!(
            from_file(file, None),
            Err(CliError::Validation { ref invariant, .. }) if invariant == "completeness"
        ));
    }

    #[test]
    fn unknown_measure_label_is_a_parse_error() {
        let mut file = ad_file();
        file.measure = Some([("x".to_string(), 1.0)].into_iter().collect());
        assert!(matches!(from_file(file, None), Err(CliError::Parse { ref path, .. }) if path == "measure.x"));
    }
}
