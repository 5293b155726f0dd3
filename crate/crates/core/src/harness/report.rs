//! Machine-readable run reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::scenario::DerivedGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |value − expected| ≤ tolerance
    Within,
    /// value ≤ expected
    AtMost,
    /// value ≥ expected
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn within(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            expected,
            tolerance,
            comparison: Comparison::Within,
            pass: (value - expected).abs() <= tolerance,
            note: None,
        }
    }

    pub fn relative(name: impl Into<String>, value: f64, expected: f64, rel: f64) -> Self {
        Self::within(name, value, expected, rel * expected.abs())
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            expected: limit,
            tolerance: 0.0,
            comparison: Comparison::AtMost,
            pass: value <= limit,
            note: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            expected: limit,
            tolerance: 0.0,
            comparison: Comparison::AtLeast,
            pass: value >= limit,
            note: None,
        }
    }

    /// Boolean outcome recorded as 1/0.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        CheckResult {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            expected: 1.0,
            tolerance: 0.0,
            comparison: Comparison::Within,
            pass: ok,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One-line summary.
    pub fn line(&self) -> String {
        let rel = match self.comparison {
            Comparison::Within => format!("{:.6e} ± {:.3e}", self.expected, self.tolerance),
            Comparison::AtMost => format!("≤ {:.6e}", self.expected),
            Comparison::AtLeast => format!("≥ {:.6e}", self.expected),
        };
        format!(
            "{} {}: {:.6e} (expected {rel})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDoc {
    pub file: String,
    pub column: String,
    pub unit: String,
    pub description: String,
}

impl ColumnDoc {
    pub fn new(file: &str, column: &str, unit: &str, description: &str) -> Self {
        ColumnDoc {
            file: file.into(),
            column: column.into(),
            unit: unit.into(),
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<DerivedGeometry>,
    pub checks: Vec<CheckResult>,
    /// Named scalar results (estimates, MC-vs-analytic rows).
    pub results: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
    pub csv_schema: Vec<ColumnDoc>,
    pub warnings: Vec<Warning>,
    /// Wall-clock seconds per stage; excluded from reproducibility comparisons.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        RunReport {
            experiment: experiment.into(),
            config,
            geometry: None,
            checks: Vec::new(),
            results: BTreeMap::new(),
            artifacts: Vec::new(),
            csv_schema: Vec::new(),
            warnings: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Adds a check; names must be unique within a report.
    pub fn push(&mut self, check: CheckResult) {
        assert!(self.check(&check.name).is_none(), "duplicate check {}", check.name);
        self.checks.push(check);
    }

    pub fn record(&mut self, name: &str, value: f64) {
        self.results.insert(name.into(), value);
    }

    pub fn absorb(&mut self, other: RunReport) {
        for c in other.checks {
            self.push(c);
        }
        self.results.extend(other.results);
        self.artifacts.extend(other.artifacts);
        self.csv_schema.extend(other.csv_schema);
        self.warnings.extend(other.warnings);
        self.timings.extend(other.timings);
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        s.push_str(&format!("{}: {} checks, {failed} failed\n", self.experiment, self.checks.len()));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_semantics() {
        assert!(CheckResult::within("a", 1.05, 1.0, 0.1).pass);
        assert!(!CheckResult::relative("b", 1.2, 1.0, 0.1).pass);
        assert!(CheckResult::at_most("c", 0.4, 0.5).pass);
        assert!(!CheckResult::at_least("d", 0.4, 0.5).pass);
        assert!(!CheckResult::within("nan", f64::NAN, 1.0, 1.0).pass);
        let mut r = RunReport::new("t", serde_json::Value::Null);
        r.push(CheckResult::flag("e", true));
        assert!(r.passed());
        r.push(CheckResult::flag("f", false));
        assert!(!r.passed());
        assert!(r.summary().contains("FAIL f"));
    }
}
