//! Tabular output as CSV or JSON.

use std::io::Write;

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl Cell {
    /// `None` and non-finite values become `Null`.
    pub fn num(v: Option<f64>) -> Cell {
        match v {
            Some(x) if x.is_finite() => Cell::Num(x),
            _ => Cell::Null,
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:?}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::num(Some(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) => s.serialize_f64(*x),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Null => s.serialize_unit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write, C: Serialize>(&self, config: &C, mut out: W) -> Result<(), CliError> {
        struct Doc<'a, C> {
            config: &'a C,
            table: &'a Table,
        }
        impl<C: Serialize> Serialize for Doc<'_, C> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(3))?;
                m.serialize_entry("config", self.config)?;
                m.serialize_entry("columns", &self.table.columns)?;
                m.serialize_entry("rows", &self.table.rows)?;
                m.end()
            }
        }
        serde_json::to_writer_pretty(&mut out, &Doc { config, table: self })
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write<W: Write, C: Serialize>(&self, format: Format, config: &C, out: W) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(config, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(["x", "label", "ok", "missing"]);
        t.push(vec![Cell::from(1e-5), "a,b".into(), true.into(), Cell::Null]);
        t.push(vec![Cell::from(0.1 + 0.2), "c".into(), false.into(), Cell::num(Some(f64::NAN))]);
        t
    }

    #[test]
    fn csv_is_lf_and_shortest() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,label,ok,missing\n1e-5,\"a,b\",true,\n0.30000000000000004,c,false,\n");
    }

    #[test]
    fn json_layout() {
        let mut buf = Vec::new();
        sample().write_json(&serde_json::json!({"k": 1}), &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["columns"][1], "label");
        assert_eq!(v["rows"][0][0].as_f64(), Some(1e-5));
        assert!(v["rows"][1][3].is_null());
        assert_eq!(v["config"]["k"], 1);
    }
}
