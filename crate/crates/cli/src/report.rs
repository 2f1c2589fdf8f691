use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// One labelled result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub suite: String,
    pub check: String,
    pub label: String,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(default)]
    pub values: BTreeMap<String, Value>,
}

impl Record {
    pub fn new(suite: &str, check: &str, label: impl Into<String>) -> Self {
        Self {
            suite: suite.to_string(),
            check: check.to_string(),
            label: label.into(),
            residual: None,
            tolerance: None,
            pass: true,
            values: BTreeMap::new(),
        }
    }

    /// Attach a residual and judge it against `tol`.
    pub fn judged(mut self, residual: f64, tol: f64) -> Self {
        self.residual = Some(residual);
        self.tolerance = Some(tol);
        self.pass = residual.is_finite() && residual < tol;
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    pub fn failed(mut self) -> Self {
        self.pass = false;
        self
    }

    fn sort_key(&self) -> (&str, &str, &str) {
        (&self.suite, &self.check, &self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub pass: bool,
    pub worst_residual: Option<f64>,
    pub counts: Counts,
    /// Labels of failing records, in record order.
    #[serde(default)]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Command output. Everything except `timing` is deterministic for a given
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub results: Vec<Record>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    /// Build a report; records are sorted by `(suite, check, label)` with ties
    /// kept in the order given.
    pub fn new(command: &str, config: Value, mut results: Vec<Record>) -> Self {
        results.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let failed: Vec<&Record> = results.iter().filter(|r| !r.pass).collect();
        let worst_residual = results
            .iter()
            .filter_map(|r| r.residual)
            .fold(None, |acc: Option<f64>, r| {
                Some(acc.map_or(r, |a| if r > a || r.is_nan() { r } else { a }))
            });
        let summary = Summary {
            pass: failed.is_empty(),
            worst_residual,
            counts: Counts {
                total: results.len(),
                passed: results.len() - failed.len(),
                failed: failed.len(),
            },
            failures: failed
                .iter()
                .map(|r| format!("{}/{}: {}", r.suite, r.check, r.label))
                .collect(),
        };
        Self {
            command: command.to_string(),
            config,
            results,
            summary,
            timing: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read report {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not a report: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Records as CSV; the `values` map is spread into sorted extra columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let extra: BTreeSet<&str> = self
            .results
            .iter()
            .flat_map(|r| r.values.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["suite", "check", "label", "residual", "tolerance", "pass"];
        header.extend(extra.iter().copied());
        w.write_record(&header)?;
        for r in &self.results {
            let mut row = vec![
                r.suite.clone(),
                r.check.clone(),
                r.label.clone(),
                r.residual.map(fmt_num).unwrap_or_default(),
                r.tolerance.map(fmt_num).unwrap_or_default(),
                r.pass.to_string(),
            ];
            for key in &extra {
                row.push(match r.values.get(*key) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::Number(n)) => match n.as_f64() {
                        Some(x) if n.is_f64() => fmt_num(x),
                        _ => n.to_string(),
                    },
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, `.` as decimal separator.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Merge reports into one summary with a row per input.
pub fn merge(paths: &[std::path::PathBuf]) -> Result<Report, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage(
            "report merge needs at least one report".into(),
        ));
    }
    let mut records = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let rep = Report::load(path)?;
        let mut rec = Record::new(
            &rep.command,
            "summary",
            format!("{i:03} {}", path.display()),
        )
        .with("total", rep.summary.counts.total)
        .with("failed", rep.summary.counts.failed);
        rec.residual = rep.summary.worst_residual;
        rec.pass = rep.summary.pass;
        if let Some(first) = rep.summary.failures.first() {
            rec = rec.with("first_failure", first.clone());
        }
        records.push(rec);
    }
    let inputs: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    Ok(Report::new(
        "report merge",
        serde_json::json!({ "inputs": inputs }),
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }

    #[test]
    fn summary_counts_and_ordering() {
        let recs = vec![
            Record::new("s", "b", "2").judged(0.5, 1.0),
            Record::new("s", "a", "1").judged(2.0, 1.0),
            Record::new("s", "b", "1"),
        ];
        let rep = Report::new("test", Value::Null, recs);
        assert_eq!(rep.results[0].check, "a");
        assert_eq!(rep.results[1].label, "1");
        assert!(!rep.summary.pass);
        assert_eq!(rep.summary.counts.failed, 1);
        assert_eq!(rep.summary.worst_residual, Some(2.0));
        assert_eq!(rep.summary.failures, vec!["s/a: 1".to_string()]);
    }

    #[test]
    fn csv_spreads_values() {
        let rep = Report::new(
            "t",
            Value::Null,
            vec![Record::new("s", "c", "x").with("energy", 1.5).with("n", 2)],
        );
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "suite,check,label,residual,tolerance,pass,energy,n\ns,c,x,,,true,1.5000000000000000e0,2\n"
        );
    }
}
