//! Plot-ready tables and their CSV and JSON encodings.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so every table reloads losslessly. Missing values are empty
//! CSV fields and JSON `null`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn opt_num(v: Option<f64>) -> Self {
        v.map_or(Self::Missing, Self::Num)
    }

    pub fn opt_year(v: Option<i32>) -> Self {
        v.map_or(Self::Missing, |y| Self::Int(y.into()))
    }

    fn csv(&self) -> String {
        match self {
            Self::Num(v) => format!("{v}"),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Self::Int(v) => Value::from(*v),
            Self::Text(s) => Value::from(s.as_str()),
            Self::Missing => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Num(v) => Some(*v),
            Self::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Self::Int(v.into())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| (h.clone(), c.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)? + "\n")
    }

    /// Parses a CSV written by [`Table::to_csv`]. Fields that parse as
    /// numbers become numbers, so integer columns come back as `Num`.
    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != header.len() {
                bail!("row width {} differs from header width {}", record.len(), header.len());
            }
            rows.push(
                record
                    .iter()
                    .map(|f| {
                        if f.is_empty() {
                            Cell::Missing
                        } else if let Ok(v) = f.parse::<f64>() {
                            Cell::Num(v)
                        } else {
                            Cell::Text(f.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(Self {
            name: name.to_string(),
            header,
            rows,
        })
    }

    /// Writes the table into `dir` and returns the file path.
    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        let (path, body) = match format {
            Format::Csv => (dir.join(format!("{}.csv", self.name)), self.to_csv()?),
            Format::Json => (dir.join(format!("{}.json", self.name)), self.to_json()?),
        };
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Writes a pretty-printed JSON document into `dir`.
pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.json"));
    let body = serde_json::to_string_pretty(value)? + "\n";
    fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("sample", &["name", "value", "year"]);
        t.push(vec!["coal".into(), Cell::Num(0.1 + 0.2), Cell::Int(2041)]);
        t.push(vec!["wind, onshore".into(), Cell::Num(-1.5e-300), Cell::Missing]);
        t.push(vec!["solar".into(), Cell::Num(123456789.123456789), Cell::Int(-3)]);
        t
    }

    #[test]
    fn csv_round_trips_exactly() {
        let t = sample();
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("name,value,year\n"));
        let back = Table::from_csv("sample", &text).unwrap();
        assert_eq!(back.header, t.header);
        for (a, b) in back.rows.iter().zip(&t.rows) {
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1].as_f64(), b[1].as_f64());
            assert_eq!(a[2].as_f64(), b[2].as_f64());
        }
    }

    #[test]
    fn json_rows_are_objects() {
        let text = sample().to_json().unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["name"], "coal");
        assert_eq!(v[0]["value"].as_f64(), Some(0.1 + 0.2));
        assert!(v[1]["year"].is_null());
    }
}
