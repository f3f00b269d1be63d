use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(x) => x.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Bool(x) => x.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(x) => json!(x),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(x) => json!(fmt_float(*x)),
            Cell::Bool(x) => json!(x),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        json!({ "columns": self.header, "rows": rows })
    }
}

/// `(x, y, series)` triples for plotting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    points: Vec<(f64, f64, String)>,
}

impl PlotData {
    pub fn push(&mut self, x: f64, y: f64, series: &str) {
        self.points.push((x, y, series.to_string()));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,series\n");
        for (x, y, s) in &self.points {
            let _ = writeln!(out, "{},{},{}", fmt_float(*x), fmt_float(*y), s);
        }
        out
    }
}

/// Everything one command writes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub name: &'static str,
    pub table: Table,
    pub plot: PlotData,
    pub summary: Option<Value>,
}

impl Artifacts {
    /// Writes `<name>.csv`, `<name>.json`, `<name>_plot.csv` and, when
    /// present, `<name>_summary.json`. Returns the written paths.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let mut put = |file: String, body: String| -> std::io::Result<()> {
            let p = dir.join(file);
            fs::write(&p, body)?;
            paths.push(p);
            Ok(())
        };
        put(format!("{}.csv", self.name), self.table.to_csv())?;
        put(format!("{}.json", self.name), pretty(&self.table.to_json()))?;
        put(format!("{}_plot.csv", self.name), self.plot.to_csv())?;
        if let Some(s) = &self.summary {
            put(format!("{}_summary.json", self.name), pretty(s))?;
        }
        Ok(paths)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
