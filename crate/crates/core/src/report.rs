//! Structured pass/fail records shared by every certificate and probe.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Version of the JSON report and config schemas.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

/// One asserted quantity: `lower <= value <= upper` where present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub params: BTreeMap<String, Value>,
    pub trials: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub bound: Option<f64>,
    pub slope: Option<f64>,
    pub constant: Option<f64>,
    pub checks: Vec<Check>,
    pub records: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub pass: bool,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            suite: suite.into(),
            params: BTreeMap::new(),
            trials: 0,
            min: None,
            max: None,
            bound: None,
            slope: None,
            constant: None,
            checks: Vec::new(),
            records: Vec::new(),
            notes: Vec::new(),
            pass: false,
            wall_time_s: 0.0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.set_param(key, value);
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.params.insert(key.to_string(), v);
    }

    pub fn record(&mut self, value: f64) {
        self.record_with(value, BTreeMap::new());
    }

    pub fn record_with(&mut self, value: f64, extra: BTreeMap<String, f64>) {
        let index = self.records.len();
        self.records.push(TrialRecord {
            index,
            value: finite(value),
            extra,
        });
    }

    pub fn check_range(
        &mut self,
        name: &str,
        value: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> bool {
        let pass = value.is_finite()
            && lower.is_none_or(|lo| value >= lo)
            && upper.is_none_or(|hi| value <= hi);
        self.checks.push(Check {
            name: name.to_string(),
            value: finite(value),
            lower,
            upper,
            pass,
        });
        pass
    }

    pub fn check_upper(&mut self, name: &str, value: f64, upper: f64) -> bool {
        self.check_range(name, value, None, Some(upper))
    }

    pub fn check_lower(&mut self, name: &str, value: f64, lower: f64) -> bool {
        self.check_range(name, value, Some(lower), None)
    }

    /// A boolean assertion recorded as 1 (true) or 0 (false) against lower bound 1.
    pub fn check_true(&mut self, name: &str, ok: bool) -> bool {
        self.check_range(name, if ok { 1.0 } else { 0.0 }, Some(1.0), None)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Aggregates records; `pass` is the conjunction of all checks.
    pub fn finish(mut self, started: Instant) -> Self {
        let values: Vec<f64> = self.records.iter().filter_map(|r| r.value).collect();
        self.trials = self.records.len();
        self.min = values.iter().copied().reduce(f64::min);
        self.max = values.iter().copied().reduce(f64::max);
        self.pass =
            self.checks.iter().all(|c| c.pass) && self.records.iter().all(|r| r.value.is_some());
        self.wall_time_s = started.elapsed().as_secs_f64();
        self
    }

    /// Names of failing checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// JSON with the timing field zeroed, for byte-level reproducibility checks.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        serde_json::to_string_pretty(&copy).expect("reports serialize")
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
