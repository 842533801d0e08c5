//! Result rows, CSV emission and the text summary.

use crate::CliError;
use std::fmt::Write as _;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// How a value is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// |value / reference - 1| <= tol
    Relative { reference: f64, tol: f64 },
    /// |value - reference| <= tol
    Absolute { reference: f64, tol: f64 },
    AtMost(f64),
    AtLeast(f64),
    /// value in [lo, hi]
    Between(f64, f64),
    /// value is 1 for true
    Flag,
}

impl Rule {
    pub fn passes(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match *self {
            Rule::Relative { reference, tol } => (v / reference - 1.0).abs() <= tol,
            Rule::Absolute { reference, tol } => (v - reference).abs() <= tol,
            Rule::AtMost(b) => v <= b,
            Rule::AtLeast(b) => v >= b,
            Rule::Between(lo, hi) => v >= lo && v <= hi,
            Rule::Flag => v == 1.0,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Rule::Relative { .. } => "relative",
            Rule::Absolute { .. } => "absolute",
            Rule::AtMost(_) => "at_most",
            Rule::AtLeast(_) => "at_least",
            Rule::Between(..) => "between",
            Rule::Flag => "flag",
        }
    }

    /// (reference, tolerance) columns.
    fn columns(&self) -> (String, String) {
        match *self {
            Rule::Relative { reference, tol } | Rule::Absolute { reference, tol } => (fmt_num(reference), fmt_num(tol)),
            Rule::AtMost(b) | Rule::AtLeast(b) => (fmt_num(b), String::new()),
            Rule::Between(lo, hi) => (fmt_num(lo), fmt_num(hi)),
            Rule::Flag => ("1".into(), String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub quantity: String,
    pub value: f64,
    pub rule: Rule,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn push(&mut self, experiment: &str, quantity: &str, value: f64, rule: Rule) {
        let pass = rule.passes(value);
        self.rows.push(Row { experiment: experiment.into(), quantity: quantity.into(), value, rule, pass });
    }

    pub fn flag(&mut self, experiment: &str, quantity: &str, ok: bool) {
        self.push(experiment, quantity, if ok { 1.0 } else { 0.0 }, Rule::Flag);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn get(&self, quantity: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["experiment", "quantity", "value", "rule", "reference", "tolerance", "pass"])?;
        for r in &self.rows {
            let (reference, tol) = r.rule.columns();
            w.write_record([
                r.experiment.as_str(),
                r.quantity.as_str(),
                &fmt_num(r.value),
                r.rule.label(),
                &reference,
                &tol,
                if r.pass { "PASS" } else { "FAIL" },
            ])?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?).expect("utf-8");
        Ok(format!("# schema_version={SCHEMA_VERSION}\n{body}"))
    }

    /// One line per row plus a pass count.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(s, "[{}] {} {} = {}", if r.pass { "PASS" } else { "FAIL" }, r.experiment, r.quantity, fmt_num(r.value));
        }
        let passed = self.rows.iter().filter(|r| r.pass).count();
        let _ = writeln!(s, "{passed}/{} rows pass", self.rows.len());
        s
    }
}

/// Plain decimal inside [1e-3, 1e4], exponent notation outside; shortest
/// round-trip digits either way.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a.is_finite() && (1e-3..=1e4).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A per-scenario data series: named columns with units, numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataFile {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        DataFile { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| fmt_num(*v)))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?).expect("utf-8");
        Ok(format!("# schema_version={SCHEMA_VERSION}\n{body}"))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1234.5), "1234.5");
        assert_eq!(fmt_num(3.41e4), "3.41e4");
        assert_eq!(fmt_num(-2.5e-4), "-2.5e-4");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn rules() {
        assert!(Rule::Relative { reference: 2.0, tol: 0.01 }.passes(2.01));
        assert!(!Rule::Relative { reference: 2.0, tol: 0.01 }.passes(2.1));
        assert!(Rule::Between(0.5, 2.0).passes(1.0));
        assert!(!Rule::AtMost(1.0).passes(f64::NAN));
    }
}
