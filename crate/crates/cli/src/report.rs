//! Checks, tables and the JSON summary.

use std::fmt::Write as _;
use std::path::Path;

use mrdist_core::format::sci;
use serde_json::{Map, Number, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON number rounded to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let rounded: f64 = sci(x).parse().expect("formatted float parses");
        Number::from_f64(rounded).map_or(Value::Null, Value::Number)
    } else {
        Value::String(sci(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Finite,
    /// `value` counts violations; `bound` is the window length.
    Monotone,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Finite => "finite",
            Relation::Monotone => "non-increasing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, Relation::AtMost, value <= bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, Relation::AtLeast, value >= bound)
    }

    pub fn finite(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, f64::INFINITY, Relation::Finite, value.is_finite())
    }

    /// Whether `values` is non-increasing over its last `window` entries.
    pub fn monotone(name: impl Into<String>, values: &[f64], window: usize) -> Self {
        let tail = &values[values.len().saturating_sub(window)..];
        let violations = tail.windows(2).filter(|w| !(w[1] <= w[0])).count();
        Self::new(
            name,
            violations as f64,
            window as f64,
            Relation::Monotone,
            violations == 0,
        )
    }

    fn new(name: impl Into<String>, value: f64, bound: f64, relation: Relation, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            relation,
            pass,
        }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(self.name.clone()));
        m.insert("value".into(), num(self.value));
        m.insert("bound".into(), num(self.bound));
        m.insert("relation".into(), Value::String(self.relation.symbol().into()));
        m.insert("pass".into(), Value::Bool(self.pass));
        Value::Object(m)
    }
}

/// A CSV table with fixed float formatting.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(file: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            file: file.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| sci(*v)).collect());
    }

    /// Row whose first cell is a label.
    pub fn labeled_row(&mut self, label: &str, values: &[f64]) {
        let mut r = vec![label.to_string()];
        r.extend(values.iter().map(|v| sci(*v)));
        self.rows.push(r);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

/// Everything a pipeline produces, written once at the end.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
}

impl Outcome {
    pub fn put(&mut self, key: &str, value: Value) {
        self.results.insert(key.into(), value);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.clone())
            .collect()
    }
}

pub struct Header<'a> {
    pub name: &'a str,
    pub pipeline: &'a str,
    pub filter: &'a str,
    pub distribution: Option<&'a str>,
}

pub fn summary(header: &Header, outcome: &Outcome, error: Option<(&str, String)>) -> Value {
    let mut m = Map::new();
    m.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    m.insert("name".into(), Value::String(header.name.into()));
    m.insert("pipeline".into(), Value::String(header.pipeline.into()));
    m.insert("filter".into(), Value::String(header.filter.into()));
    m.insert(
        "distribution".into(),
        header
            .distribution
            .map_or(Value::Null, |d| Value::String(d.into())),
    );
    let mut failing = outcome.failing();
    if let Some((criterion, _)) = &error {
        failing.push(criterion.to_string());
    }
    let pass = failing.is_empty();
    m.insert(
        "verdict".into(),
        Value::String(if pass { "pass" } else { "fail" }.into()),
    );
    m.insert(
        "failing".into(),
        Value::Array(failing.into_iter().map(Value::String).collect()),
    );
    m.insert(
        "checks".into(),
        Value::Array(outcome.checks.iter().map(Check::to_json).collect()),
    );
    m.insert("results".into(), Value::Object(outcome.results.clone()));
    if let Some((_, message)) = error {
        m.insert("error".into(), Value::String(message));
    }
    Value::Object(m)
}

pub fn write_all(dir: &Path, tables: &[Table], summary: &Value) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        std::fs::write(dir.join(&t.file), t.render())?;
    }
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_rounded() {
        assert_eq!(num(0.1 + 0.2).to_string(), "0.3");
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(num(-0.0).to_string(), "0.0");
    }

    #[test]
    fn checks() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_least("b", 0.4, 0.5).pass);
        assert!(!Check::finite("c", f64::NAN).pass);
        let m = Check::monotone("d", &[5.0, 1.0, 3.0, 2.0, 1.0], 3);
        assert!(m.pass && m.value == 0.0);
        assert!(!Check::monotone("e", &[1.0, 2.0], 4).pass);
    }

    #[test]
    fn tables_render() {
        let mut t = Table::new("t.csv", &["x", "y"]);
        t.row(&[1.0, -0.0]);
        t.labeled_row("balls", &[0.5]);
        assert_eq!(
            t.render(),
            "x,y\n1.00000000000e0,0.00000000000e0\nballs,5.00000000000e-1\n"
        );
    }
}
