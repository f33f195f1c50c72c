use std::collections::BTreeMap;
use std::fmt::Display;

use qsa_core::qcore::ComplexVector;
use serde::Serialize;
use serde_json::Value;

/// One pass/fail line of a report. `value` is compared against
/// `tolerance` unless the check is a plain flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub input_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
}

/// One sampled step of a `simulate` run. `step` restarts at 1 for every
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub step: usize,
    pub outcome: String,
    pub channel: usize,
    pub prob: f64,
    pub weight: f64,
    pub state: ComplexVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub payload: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Value>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub record: Option<Vec<RecordRow>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        crate::scenario::render(&serde_json::to_value(self).expect("reports always serialize"))
    }

    /// `check,passed,value,tolerance,detail` rows.
    pub fn checks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "passed", "value", "tolerance", "detail"]).expect("in-memory write");
        for c in &self.checks {
            let num = |x: Option<f64>| x.map_or(String::new(), number);
            w.write_record([
                c.name.clone(),
                c.passed.to_string(),
                num(c.value),
                num(c.tolerance),
                c.detail.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// The `simulate` record, or `None` for other commands.
    pub fn record_csv(&self) -> Option<String> {
        let rows = self.record.as_ref()?;
        let dim = rows.first().map_or(0, |r| r.state.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["step", "outcome", "channel", "prob", "weight"].map(String::from).to_vec();
        header.extend((0..dim).map(|k| format!("state_re{k}")));
        header.extend((0..dim).map(|k| format!("state_im{k}")));
        w.write_record(&header).expect("in-memory write");
        for r in rows {
            let mut fields = vec![
                r.step.to_string(),
                r.outcome.clone(),
                r.channel.to_string(),
                number(r.prob),
                number(r.weight),
            ];
            fields.extend(r.state.iter().map(|z| number(z.re)));
            fields.extend(r.state.iter().map(|z| number(z.im)));
            w.write_record(&fields).expect("in-memory write");
        }
        Some(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"))
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// and very large magnitudes.
fn number(x: f64) -> String {
    format!("{x:?}")
}

/// Accumulates checks and tables while a command runs.
#[derive(Debug, Default)]
pub(crate) struct ReportBuilder {
    checks: Vec<Check>,
    tables: BTreeMap<String, Value>,
    record: Option<Vec<RecordRow>>,
}

impl ReportBuilder {
    /// Passes when `value ≤ tolerance`; NaN fails.
    pub fn bound(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            passed: value <= tolerance,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: None,
        });
    }

    pub fn flag(&mut self, name: &str, passed: bool, detail: Option<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value: None,
            tolerance: None,
            detail,
        });
    }

    pub fn failure(&mut self, name: &str, err: impl Display) {
        self.flag(name, false, Some(err.to_string()));
    }

    pub fn table(&mut self, name: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("tables hold plain data");
        self.tables.insert(name.into(), value);
    }

    pub fn record(&mut self, rows: Vec<RecordRow>) {
        self.record = Some(rows);
    }

    pub fn finish(self, command: &str, payload: &str, provenance: Provenance) -> Report {
        let passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        Report {
            command: command.into(),
            payload: payload.into(),
            passed,
            checks: self.checks,
            tables: self.tables,
            provenance,
            record: self.record,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn provenance() -> Provenance {
        Provenance {
            input_sha256: "00".into(),
            seed: Some(1),
            version: "0".into(),
        }
    }

    #[test]
    fn nan_values_fail_bounds() {
        let mut b = ReportBuilder::default();
        b.bound("x", f64::NAN, 1.0);
        assert!(!b.finish("c", "p", provenance()).passed);
    }

    #[test]
    fn empty_reports_do_not_pass() {
        assert!(!ReportBuilder::default().finish("c", "p", provenance()).passed);
    }

    #[test]
    fn record_header_lists_state_components() {
        let mut b = ReportBuilder::default();
        b.flag("ok", true, None);
        b.record(vec![RecordRow {
            step: 1,
            outcome: "a,b".into(),
            channel: 0,
            prob: 0.5,
            weight: 1.0,
            state: ComplexVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -0.5)]),
        }]);
        let csv = b.finish("simulate", "model", provenance()).record_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,outcome,channel,prob,weight,state_re0,state_re1,state_im0,state_im1"));
        assert_eq!(lines.next(), Some("1,\"a,b\",0,0.5,1.0,1.0,0.0,0.0,-0.5"));
    }
}
