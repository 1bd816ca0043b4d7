//! Plain CSV tables and tolerance-based comparison between table sets.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Cell {
    Empty,
    Text(String),
    Num(f64),
}

impl Cell {
    fn parse(s: &str) -> Cell {
        let t = s.trim();
        if t.is_empty() {
            Cell::Empty
        } else if let Ok(v) = t.parse::<f64>() {
            Cell::Num(v)
        } else {
            Cell::Text(t.to_string())
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Empty => Ok(()),
            Cell::Text(s) => f.write_str(s),
            // shortest representation that round-trips
            Cell::Num(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    /// File stem, e.g. `htmt`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn read(path: &Path) -> Result<Table> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let text = fs::read_to_string(path).at(path)?;
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(Table { name, header, rows })
    }
}

/// Absolute tolerances per table name, with a fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub default: f64,
    pub per_table: BTreeMap<String, f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            default: 0.005,
            per_table: BTreeMap::new(),
        }
    }
}

impl Tolerances {
    pub fn get(&self, table: &str) -> f64 {
        self.per_table.get(table).copied().unwrap_or(self.default)
    }

    /// Parses `TABLE=EPS` settings; `default=EPS` replaces the fallback.
    pub fn parse<'a>(settings: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut t = Tolerances::default();
        for s in settings {
            let (name, eps) = s
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("tolerance `{s}` is not TABLE=EPS")))?;
            let eps: f64 = eps
                .trim()
                .parse()
                .ok()
                .filter(|e: &f64| *e >= 0.0)
                .ok_or_else(|| Error::InvalidArgument(format!("tolerance `{s}` needs a non-negative number")))?;
            let name = name.trim().trim_end_matches(".csv");
            if name == "default" {
                t.default = eps;
            } else {
                t.per_table.insert(name.to_string(), eps);
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub table: String,
    /// 1-based data row.
    pub row: usize,
    pub column: String,
    pub bundle: String,
    pub reference: String,
    /// Infinite for non-numeric mismatches.
    pub diff: f64,
    pub tolerance: f64,
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {} column {}: bundle {} vs reference {} (|diff| {} > {})",
            self.table, self.row, self.column, self.bundle, self.reference, self.diff, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tables: Vec<String>,
    pub offenders: Vec<Offender>,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.offenders.is_empty()
    }
}

fn cell_diff(a: &Cell, b: &Cell) -> f64 {
    match (a, b) {
        (Cell::Empty, Cell::Empty) => 0.0,
        (Cell::Num(x), Cell::Num(y)) => {
            if x == y || (x.is_nan() && y.is_nan()) {
                0.0
            } else {
                let d = (x - y).abs();
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
        }
        (Cell::Text(x), Cell::Text(y)) if x == y => 0.0,
        _ => f64::INFINITY,
    }
}

/// Cell-by-cell comparison; tables must share header and row count.
pub fn compare_tables(bundle: &Table, reference: &Table, tolerance: f64) -> Result<Vec<Offender>> {
    if bundle.header != reference.header {
        return Err(Error::SchemaMismatch(format!(
            "{}: header [{}] vs reference [{}]",
            reference.name,
            bundle.header.join(","),
            reference.header.join(",")
        )));
    }
    if bundle.rows.len() != reference.rows.len() {
        return Err(Error::SchemaMismatch(format!(
            "{}: {} rows vs reference {}",
            reference.name,
            bundle.rows.len(),
            reference.rows.len()
        )));
    }
    let mut out = Vec::new();
    for (i, (a, b)) in bundle.rows.iter().zip(&reference.rows).enumerate() {
        if a.len() != b.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} row {}: {} cells vs reference {}",
                reference.name,
                i + 1,
                a.len(),
                b.len()
            )));
        }
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let diff = cell_diff(x, y);
            if diff > tolerance {
                out.push(Offender {
                    table: reference.name.clone(),
                    row: i + 1,
                    column: reference.header.get(k).cloned().unwrap_or_default(),
                    bundle: x.to_string(),
                    reference: y.to_string(),
                    diff,
                    tolerance,
                });
            }
        }
    }
    Ok(out)
}

/// Compares every `*.csv` in `reference` with the same-named file in `bundle`.
pub fn compare_to_reference(bundle: &Path, reference: &Path, tolerances: &Tolerances) -> Result<ComparisonReport> {
    let mut names: Vec<_> = fs::read_dir(reference)
        .at(reference)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "{}: no reference tables",
            reference.display()
        )));
    }
    let mut report = ComparisonReport {
        tables: Vec::new(),
        offenders: Vec::new(),
    };
    for path in names {
        let reference = Table::read(&path)?;
        let own = bundle.join(path.file_name().expect("file path"));
        if !own.exists() {
            return Err(Error::SchemaMismatch(format!(
                "{} has no counterpart in the bundle",
                reference.name
            )));
        }
        let ours = Table::read(&own)?;
        let tol = tolerances.get(&reference.name);
        report.offenders.extend(compare_tables(&ours, &reference, tol)?);
        report.tables.push(reference.name);
    }
    Ok(report)
}
