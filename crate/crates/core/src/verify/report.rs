use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

/// Outcome of one check. Every bounded quantity is stored under a key in
/// `measured`, `predicted_bound`, `formulae` and `slack`; unbounded keys in
/// `measured` are diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_id: String,
    pub status: CheckStatus,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub predicted_bound: BTreeMap<String, f64>,
    pub formulae: BTreeMap<String, String>,
    pub slack: BTreeMap<String, f64>,
    /// Allowed excess of every slack over one.
    pub tolerance: f64,
    pub tolerance_policy: String,
    pub notes: Vec<String>,
}

/// One bounded entry of a report, flattened for tabular output.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub key: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check_id: &str, tolerance: f64, policy: impl Into<String>) -> Self {
        Self {
            check_id: check_id.into(),
            status: CheckStatus::Passed,
            pass: true,
            measured: BTreeMap::new(),
            predicted_bound: BTreeMap::new(),
            formulae: BTreeMap::new(),
            slack: BTreeMap::new(),
            tolerance,
            tolerance_policy: policy.into(),
            notes: Vec::new(),
        }
    }

    pub fn skipped(check_id: &str, tolerance: f64, policy: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut r = Self::new(check_id, tolerance, policy);
        r.status = CheckStatus::Skipped;
        r.pass = false;
        r.notes.push(reason.into());
        r
    }

    /// Records `measured ≤ bound` under `key`; a zero measurement has zero
    /// slack whatever the bound.
    pub fn compare(&mut self, key: impl Into<String>, measured: f64, bound: f64, formula: impl Into<String>) {
        let key = key.into();
        let slack = if measured == 0.0 { 0.0 } else { measured / bound };
        self.measured.insert(key.clone(), measured);
        self.predicted_bound.insert(key.clone(), bound);
        self.formulae.insert(key.clone(), formula.into());
        self.slack.insert(key, slack);
        self.settle();
    }

    /// Diagnostic value without a bound.
    pub fn record(&mut self, key: impl Into<String>, value: f64) {
        self.measured.insert(key.into(), value);
        self.settle();
    }

    /// Replaces the slack allowance, e.g. when a check falls back to a
    /// randomized estimate.
    pub fn set_tolerance(&mut self, tolerance: f64, policy: impl Into<String>) {
        self.tolerance = tolerance;
        self.tolerance_policy = policy.into();
        self.settle();
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn settle(&mut self) {
        if self.status == CheckStatus::Skipped {
            return;
        }
        let limit = 1.0 + self.tolerance;
        let slacks_ok = self.slack.values().all(|s| s.is_finite() && *s <= limit);
        let finite = self.measured.values().all(|v| v.is_finite());
        self.pass = slacks_ok && finite;
        self.status = if self.pass { CheckStatus::Passed } else { CheckStatus::Failed };
    }

    /// Bounded entries in key order.
    pub fn rows(&self) -> Vec<ReportRow> {
        let limit = 1.0 + self.tolerance;
        self.slack
            .iter()
            .map(|(k, &s)| ReportRow {
                key: k.clone(),
                measured: self.measured[k],
                bound: self.predicted_bound[k],
                slack: s,
                pass: s.is_finite() && s <= limit,
            })
            .collect()
    }

    /// Skipped reports count as neither passing nor failing.
    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Failed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_slack_and_tolerance() {
        let mut r = CheckReport::new("x", 0.05, "5%");
        r.compare("a", 1.04, 1.0, "a ≤ 1");
        assert!(r.pass);
        r.compare("b", 1.06, 1.0, "b ≤ 1");
        assert!(!r.pass && r.status == CheckStatus::Failed);
        assert_eq!(r.rows().len(), 2);
        assert!(r.rows()[0].pass && !r.rows()[1].pass);
    }

    #[test]
    fn non_finite_diagnostics_fail() {
        let mut r = CheckReport::new("x", 0.0, "exact");
        r.record("d", f64::NAN);
        assert!(r.failed());
    }

    #[test]
    fn skipped_reports_stay_skipped() {
        let mut r = CheckReport::skipped("x", 0.0, "exact", "not applicable");
        r.record("d", 1.0);
        assert_eq!(r.status, CheckStatus::Skipped);
        assert!(!r.failed());
    }
}
