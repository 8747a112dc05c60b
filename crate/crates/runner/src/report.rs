//! Result rows, per-criterion verdicts and the files they are written to.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

/// One measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// Acceptance criterion the row feeds, if any.
    pub criterion: Option<u32>,
    /// Plain-language statement the row checks.
    pub claim: String,
    pub quantity: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: u32,
    pub title: String,
    pub pass: bool,
    pub numbers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    /// Free-form remarks echoed to stderr and the summary.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    /// Starts a row group that shares a criterion and claim.
    pub fn claim(&mut self, criterion: Option<u32>, claim: &str) -> Claim<'_> {
        Claim {
            report: self,
            criterion,
            claim: claim.to_string(),
        }
    }

    /// Records the verdict for `criterion` from all its rows that carry a
    /// pass flag, plus `extra` (use `true` when there is nothing else).
    pub fn conclude(&mut self, criterion: u32, title: &str, extra: bool) {
        let rows: Vec<&Row> = self.rows.iter().filter(|r| r.criterion == Some(criterion)).collect();
        let pass = extra && rows.iter().all(|r| r.pass != Some(false));
        let numbers = rows.iter().map(|r| (r.quantity.clone(), r.value)).collect();
        self.verdicts.push(Verdict {
            criterion,
            title: title.to_string(),
            pass,
            numbers,
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn row(&self, quantity: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn value(&self, quantity: &str) -> Option<f64> {
        self.row(quantity).map(|r| r.value)
    }

    /// CSV with columns `criterion,claim,quantity,value,reference,tolerance,pass`.
    /// Numbers use the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["criterion", "claim", "quantity", "value", "reference", "tolerance", "pass"])?;
        let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.criterion.map(|c| c.to_string()).unwrap_or_default(),
                r.claim.clone(),
                r.quantity.clone(),
                r.value.to_string(),
                num(r.reference),
                num(r.tolerance),
                r.pass.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `{experiment, status, criteria: {id: {title, status, numbers}}, notes}`.
    pub fn summary(&self) -> serde_json::Value {
        let criteria: serde_json::Map<String, serde_json::Value> = self
            .verdicts
            .iter()
            .map(|v| {
                (
                    v.criterion.to_string(),
                    serde_json::json!({
                        "title": v.title,
                        "status": status(v.pass),
                        "numbers": v.numbers,
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "experiment": self.experiment,
            "status": status(self.passed()),
            "criteria": criteria,
            "notes": self.notes,
        })
    }
}

pub fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub struct Claim<'a> {
    report: &'a mut Report,
    criterion: Option<u32>,
    claim: String,
}

impl Claim<'_> {
    fn push(&mut self, quantity: String, value: f64, reference: Option<f64>, tolerance: Option<f64>, pass: Option<bool>) {
        self.report.rows.push(Row {
            criterion: self.criterion,
            claim: self.claim.clone(),
            quantity,
            value,
            reference,
            tolerance,
            pass,
        });
    }

    /// A number with no pass/fail meaning.
    pub fn info(&mut self, quantity: impl Into<String>, value: f64) -> &mut Self {
        self.push(quantity.into(), value, None, None, None);
        self
    }

    /// `|value - reference| <= tolerance`.
    pub fn near(&mut self, quantity: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> &mut Self {
        let pass = (value - reference).abs() <= tolerance;
        self.push(quantity.into(), value, Some(reference), Some(tolerance), Some(pass));
        self
    }

    /// `value <= bound`.
    pub fn at_most(&mut self, quantity: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(quantity.into(), value, Some(bound), None, Some(value <= bound));
        self
    }

    /// `value >= bound`.
    pub fn at_least(&mut self, quantity: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(quantity.into(), value, Some(bound), None, Some(value >= bound));
        self
    }

    /// A computed yes/no outcome, stored as 1 or 0.
    pub fn check(&mut self, quantity: impl Into<String>, ok: bool) -> &mut Self {
        self.push(quantity.into(), f64::from(u8::from(ok)), Some(1.0), None, Some(ok));
        self
    }
}
