//! Run reports: JSON lines, one record per check followed by a summary
//! object, and an optional CSV of residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::suite::CheckRecord;

/// Timing and version data, left out of reproducible reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub version: String,
    pub unix_time: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub samples: usize,
    pub step: f64,
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub failing: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: Summary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(
        scenario: &str,
        kind: &str,
        seed: u64,
        samples: usize,
        step: f64,
        mut records: Vec<CheckRecord>,
    ) -> Self {
        records.sort_by(|a, b| a.check.cmp(&b.check));
        let failing: Vec<String> = records.iter().filter(|r| !r.pass).map(|r| r.check.clone()).collect();
        let summary = Summary {
            scenario: scenario.to_string(),
            kind: kind.to_string(),
            seed,
            samples,
            step,
            checks: records.len(),
            passed: records.len() - failing.len(),
            failed: failing.len(),
            failing,
            meta: None,
        };
        Self { records, summary }
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.summary.meta = Some(meta);
        self
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        let line = SummaryLine {
            summary: self.summary.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut summary = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            if value.get("summary").is_some() {
                let s: SummaryLine =
                    serde_json::from_value(value).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
                summary = Some(s.summary);
            } else {
                records.push(
                    serde_json::from_value(value).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?,
                );
            }
        }
        let summary = summary.ok_or_else(|| Error::Config("report has no summary line".into()))?;
        Ok(Self { records, summary })
    }

    /// Problems found when re-reading a report: verdicts that do not follow
    /// from the recorded residuals, duplicated checks and summary counts
    /// that do not match.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for r in &self.records {
            if !r.consistent() {
                problems.push(format!("{}: verdict does not follow from the residuals", r.check));
            }
        }
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.check.as_str()).collect();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                problems.push(format!("{}: appears more than once", w[0]));
            }
        }
        let failed = self.records.iter().filter(|r| !r.pass).count();
        if failed != self.summary.failed || self.records.len() != self.summary.checks {
            problems.push("summary counts do not match the records".into());
        }
        problems
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "check",
            "scenario",
            "samples",
            "max_residual",
            "mean_residual",
            "order_estimate",
            "tolerance",
            "pass",
        ])
        .expect("csv header");
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.check.clone(),
                r.scenario.clone(),
                r.samples.to_string(),
                num(r.max_residual),
                num(r.mean_residual),
                num(r.order_estimate),
                format!("{:e}", r.tolerance),
                r.pass.to_string(),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, r: f64, tol: f64) -> CheckRecord {
        CheckRecord {
            check: id.into(),
            anchor: "a".into(),
            scenario: "s".into(),
            samples: 1,
            max_residual: Some(r),
            mean_residual: Some(r),
            order_estimate: None,
            order_required: None,
            tolerance: tol,
            expect_failure: false,
            pass: r <= tol,
            detail: None,
        }
    }

    #[test]
    fn records_are_sorted_and_counted() {
        let rep = RunReport::new("s", "affine", 1, 1, 1e-3, vec![record("b", 1.0, 0.1), record("a", 0.0, 0.1)]);
        assert_eq!(rep.records[0].check, "a");
        assert_eq!(rep.summary.failing, vec!["b".to_string()]);
        assert!(!rep.all_passed());
        assert!(rep.audit().is_empty());
    }

    #[test]
    fn audit_flags_duplicates_and_bad_counts() {
        let mut rep = RunReport::new("s", "affine", 1, 1, 1e-3, vec![record("a", 0.0, 0.1), record("a", 0.0, 0.1)]);
        assert!(rep.audit().iter().any(|p| p.contains("more than once")));
        rep.summary.checks = 5;
        assert!(rep.audit().iter().any(|p| p.contains("summary counts")));
    }

    #[test]
    fn meta_is_optional_in_the_summary_line() {
        let rep = RunReport::new("s", "affine", 1, 1, 1e-3, vec![record("a", 0.0, 0.1)]);
        assert!(!rep.to_jsonl().contains("meta"));
        let with = rep.with_meta(Meta { version: "0".into(), unix_time: 1, elapsed_ms: 2 });
        let back = RunReport::from_jsonl(&with.to_jsonl()).unwrap();
        assert_eq!(back.summary.meta.unwrap().elapsed_ms, 2);
        assert!(RunReport::from_jsonl("{\"check\":1}\n").is_err());
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let rep = RunReport::new("s", "affine", 1, 1, 1e-3, vec![record("a", 0.0, 0.1), record("b", 2e-3, 0.1)]);
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("check,scenario"));
        assert!(lines[2].contains("2e-3"));
    }
}
