//! Column tables and their CSV/JSON encodings.
//!
//! Every number is written with 12 significant digits so that regression
//! diffs only show real changes.

use serde_json::{Map, Value};
use subscatter_core::timing::Timed;

/// Identifies the producer and the input of an artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub version: &'static str,
    pub scenario_sha256: String,
}

impl Meta {
    pub fn new(scenario: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        Meta { version: env!("CARGO_PKG_VERSION"), scenario_sha256: hex::encode(Sha256::digest(scenario)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    /// A quantity without a value, such as "undefined" or "no_root".
    Label(&'static str),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Timed> for Cell {
    fn from(t: Timed) -> Self {
        match t {
            Timed::Value(v) => Cell::Num(v),
            other => Cell::Label(other.label().unwrap_or("undefined")),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Label("undefined"), Cell::Num)
    }
}

impl Cell {
    pub fn number(&self) -> Option<f64> {
        match self {
            Cell::Num(v) if v.is_finite() => Some(*v),
            _ => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Label(s) => (*s).into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => Value::from(round12(*v)),
            Cell::Num(v) => Value::from(format_number(*v)),
            Cell::Label(s) => Value::from(*s),
        }
    }
}

/// 12 significant digits in scientific notation.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        format!("{v}")
    }
}

fn round12(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Comma-separated values after '#'-prefixed metadata lines.
    pub fn to_csv(&self, meta: &Meta, title: &str) -> String {
        let mut s = format!(
            "# subscatter {}\n# scenario_sha256 {}\n# {title}\n{}\n",
            meta.version,
            meta.scenario_sha256,
            self.columns.join(",")
        );
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// `{"version", "scenario_sha256", "title", "columns": {name: [..]}}`.
    pub fn to_json(&self, meta: &Meta, title: &str) -> String {
        let mut columns = Map::new();
        for (j, name) in self.columns.iter().enumerate() {
            columns.insert(name.clone(), Value::Array(self.rows.iter().map(|r| r[j].json()).collect()));
        }
        let mut root = meta_object(meta);
        root.insert("title".into(), Value::from(title));
        root.insert("columns".into(), Value::Object(columns));
        to_pretty(&Value::Object(root))
    }
}

fn meta_object(meta: &Meta) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), Value::from(meta.version));
    m.insert("scenario_sha256".into(), Value::from(meta.scenario_sha256.clone()));
    m
}

/// A flat JSON object of named quantities after the metadata keys.
pub fn flat_json<K: AsRef<str>>(meta: &Meta, entries: &[(K, Cell)]) -> String {
    let mut root = meta_object(meta);
    for (k, v) in entries {
        root.insert(k.as_ref().into(), v.json());
    }
    to_pretty(&Value::Object(root))
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta::new(b"mode = \"times\"\n")
    }

    #[test]
    fn numbers_carry_twelve_significant_digits() {
        assert_eq!(format_number(0.1), "1.00000000000e-1");
        assert_eq!(format_number(-12345.678901234), "-1.23456789012e4");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn csv_has_metadata_header_then_columns() {
        let mut t = Table::new(&["k", "tau"]);
        t.push(vec![Cell::Num(0.5), Timed::NoRoot.into()]);
        let csv = t.to_csv(&meta(), "demo");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], format!("# subscatter {}", env!("CARGO_PKG_VERSION")));
        assert_eq!(lines[1].len(), "# scenario_sha256 ".len() + 64);
        assert_eq!(lines[3], "k,tau");
        assert_eq!(lines[4], "5.00000000000e-1,no_root");
    }

    #[test]
    fn json_keeps_column_order_and_labels() {
        let mut t = Table::new(&["z", "a"]);
        t.push(vec![Cell::Num(2.0), Timed::Undefined.into()]);
        let v: Value = serde_json::from_str(&t.to_json(&meta(), "demo")).unwrap();
        let cols: Vec<&String> = v["columns"].as_object().unwrap().keys().collect();
        assert_eq!(cols, ["z", "a"]);
        assert_eq!(v["columns"]["a"][0], "undefined");
        let flat: Value = serde_json::from_str(&flat_json(&meta(), &[("tau", Cell::Num(0.25))])).unwrap();
        assert_eq!(flat["tau"], 0.25);
        assert_eq!(flat["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn hash_is_sha256_of_the_scenario_bytes() {
        assert_eq!(
            Meta::new(b"").scenario_sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
