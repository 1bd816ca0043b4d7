//! Respondent panels: CSV ingestion and emission, deduplication and
//! demographic frequency tables.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::model::{DemographicKind, ModelSpec};

/// One respondent. Values are aligned with the owning model: `demographics`
/// with `ModelSpec::demographics`, `responses` with `ModelSpec::item_names`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RespondentRow {
    /// Stored verbatim as ingested; integer fields are checked on entry.
    pub demographics: Vec<String>,
    pub responses: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    File {
        path: PathBuf,
    },
    Llm {
        transcript: Option<PathBuf>,
        batches: usize,
    },
    Synthetic {
        seed: u64,
    },
    Memory,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::File { path } => write!(f, "file {}", path.display()),
            Provenance::Llm { transcript, batches } => match transcript {
                Some(t) => write!(f, "llm ({batches} batches, transcript {})", t.display()),
                None => write!(f, "llm ({batches} batches)"),
            },
            Provenance::Synthetic { seed } => write!(f, "synthetic (seed {seed})"),
            Provenance::Memory => f.write_str("in-memory"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    rows: Vec<RespondentRow>,
    model: Arc<ModelSpec>,
    provenance: Provenance,
}

/// Checks a row against the model; `row` is the 1-based data row for messages.
pub(crate) fn check_row(model: &ModelSpec, r: &RespondentRow, row: usize) -> Result<()> {
    if r.demographics.len() != model.demographics.len() {
        return Err(Error::Cell {
            row,
            column: "<demographics>".into(),
            message: format!(
                "expected {} demographic values, found {}",
                model.demographics.len(),
                r.demographics.len()
            ),
        });
    }
    let items = model.item_names();
    if r.responses.len() != items.len() {
        return Err(Error::Cell {
            row,
            column: "<items>".into(),
            message: format!("expected {} item responses, found {}", items.len(), r.responses.len()),
        });
    }
    for (field, value) in model.demographics.iter().zip(&r.demographics) {
        if field.kind == DemographicKind::Integer && value.trim().parse::<i64>().is_err() {
            return Err(Error::Cell {
                row,
                column: field.name.clone(),
                message: format!("`{value}` is not an integer"),
            });
        }
    }
    for (name, &score) in items.iter().zip(&r.responses) {
        if !model.scale.contains(score) {
            return Err(Error::Cell {
                row,
                column: name.to_string(),
                message: format!("score {score} outside scale {}..={}", model.scale.min, model.scale.max),
            });
        }
    }
    Ok(())
}

impl Panel {
    pub fn new(model: Arc<ModelSpec>, rows: Vec<RespondentRow>, provenance: Provenance) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            check_row(&model, r, i + 1)?;
        }
        Ok(Panel {
            rows,
            model,
            provenance,
        })
    }

    pub fn rows(&self) -> &[RespondentRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<ModelSpec> {
        Arc::clone(&self.model)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Row subset, keeping model and provenance.
    pub fn select(&self, indices: impl IntoIterator<Item = usize>) -> Panel {
        Panel {
            rows: indices.into_iter().map(|i| self.rows[i].clone()).collect(),
            model: Arc::clone(&self.model),
            provenance: self.provenance.clone(),
        }
    }

    pub fn demographic_column(&self, field: &str) -> Result<Vec<&str>> {
        let idx = self
            .model
            .demographics
            .iter()
            .position(|d| d.name == field)
            .ok_or_else(|| Error::UnknownField(field.to_string()))?;
        Ok(self.rows.iter().map(|r| r.demographics[idx].as_str()).collect())
    }

    /// Per-row unweighted mean of a construct's raw item scores.
    pub fn construct_means(&self, construct: &str) -> Result<Vec<f64>> {
        let j = self
            .model
            .construct_index(construct)
            .ok_or_else(|| Error::UnknownField(construct.to_string()))?;
        let block = self.model.blocks()[j].clone();
        let k = block.len() as f64;
        Ok(self
            .rows
            .iter()
            .map(|r| r.responses[block.clone()].iter().map(|&s| s as f64).sum::<f64>() / k)
            .collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let header: Vec<&str> = self
            .model
            .demographics
            .iter()
            .map(|d| d.name.as_str())
            .chain(self.model.item_names())
            .collect();
        out.write_record(&header)?;
        for r in &self.rows {
            let record: Vec<String> = r
                .demographics
                .iter()
                .cloned()
                .chain(r.responses.iter().map(|s| s.to_string()))
                .collect();
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).at(path)
    }
}

/// Reads a panel CSV whose header is the model's demographic columns followed
/// by every item, in model order.
pub fn ingest_csv<R: Read>(reader: R, model: Arc<ModelSpec>, provenance: Provenance) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    check_header(&model, &header)?;

    let n_demo = model.demographics.len();
    let items = model.item_names();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Cell {
                row,
                column: "<row>".into(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let demographics: Vec<String> = record.iter().take(n_demo).map(str::to_string).collect();
        let mut responses = Vec::with_capacity(items.len());
        for (name, cell) in items.iter().zip(record.iter().skip(n_demo)) {
            let score = cell.parse::<i32>().map_err(|_| Error::Cell {
                row,
                column: name.to_string(),
                message: format!("`{cell}` is not an integer score"),
            })?;
            responses.push(score);
        }
        let r = RespondentRow {
            demographics,
            responses,
        };
        check_row(&model, &r, row)?;
        rows.push(r);
    }
    Ok(Panel {
        rows,
        model,
        provenance,
    })
}

pub fn ingest_csv_file(path: &Path, model: Arc<ModelSpec>) -> Result<Panel> {
    let file = std::fs::File::open(path).at(path)?;
    ingest_csv(
        file,
        model,
        Provenance::File {
            path: path.to_path_buf(),
        },
    )
}

fn check_header(model: &ModelSpec, header: &[String]) -> Result<()> {
    let expected: Vec<&str> = model
        .demographics
        .iter()
        .map(|d| d.name.as_str())
        .chain(model.item_names())
        .collect();
    if header.iter().map(String::as_str).eq(expected.iter().copied()) {
        return Ok(());
    }
    let got: HashSet<&str> = header.iter().map(String::as_str).collect();
    let want: HashSet<&str> = expected.iter().copied().collect();
    if let Some(missing) = expected.iter().find(|c| !got.contains(*c)) {
        return Err(Error::Header(format!("missing column `{missing}`")));
    }
    if let Some(extra) = header.iter().find(|c| !want.contains(c.as_str())) {
        return Err(Error::Header(format!("unexpected column `{extra}`")));
    }
    Err(Error::Header(format!(
        "columns out of order; expected {}",
        expected.join(",")
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupKey {
    /// Item responses only.
    #[default]
    Responses,
    /// Item responses and every demographic column.
    All,
}

impl fmt::Display for DedupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DedupKey::Responses => "responses",
            DedupKey::All => "all",
        })
    }
}

impl std::str::FromStr for DedupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "responses" => Ok(DedupKey::Responses),
            "all" => Ok(DedupKey::All),
            other => Err(Error::InvalidArgument(format!(
                "dedup key `{other}` (expected responses or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DedupReport {
    pub total: usize,
    pub unique: usize,
    pub duplicate_rate: f64,
    pub key: DedupKey,
}

/// Keeps the first occurrence of each distinct key, preserving order.
pub fn dedupe(panel: &Panel, key: DedupKey) -> (Panel, DedupReport) {
    let mut seen = HashSet::with_capacity(panel.len());
    let keep: Vec<usize> = panel
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| match key {
            DedupKey::Responses => seen.insert((None, &r.responses)),
            DedupKey::All => seen.insert((Some(&r.demographics), &r.responses)),
        })
        .map(|(i, _)| i)
        .collect();
    let total = panel.len();
    let unique = keep.len();
    let duplicate_rate = if total == 0 {
        0.0
    } else {
        (total - unique) as f64 / total as f64
    };
    (
        panel.select(keep),
        DedupReport {
            total,
            unique,
            duplicate_rate,
            key,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub value: String,
    pub label: String,
    pub count: usize,
    /// Share of the panel in percent, rounded to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub field: String,
    pub total: usize,
    pub rows: Vec<FrequencyRow>,
}

pub fn demographics_table(panel: &Panel, field: &str) -> Result<FrequencyTable> {
    let values = panel.demographic_column(field)?;
    let spec = panel.model.demographic(field).expect("column exists");
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for v in &values {
        match counts.iter_mut().find(|(k, _)| k == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let numeric = counts.iter().all(|(v, _)| v.parse::<f64>().is_ok());
    if numeric {
        counts.sort_by(|a, b| {
            let x: f64 = a.0.parse().unwrap();
            let y: f64 = b.0.parse().unwrap();
            x.total_cmp(&y)
        });
    } else {
        counts.sort_by(|a, b| a.0.cmp(b.0));
    }
    let total = values.len();
    let rows = counts
        .into_iter()
        .map(|(v, c)| FrequencyRow {
            value: v.to_string(),
            label: spec.label(v).to_string(),
            count: c,
            percent: (c as f64 * 1000.0 / total as f64).round() / 10.0,
        })
        .collect();
    Ok(FrequencyTable {
        field: field.to_string(),
        total,
        rows,
    })
}

/// Raw scores as an n×p matrix with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMatrix {
    pub data: DMatrix<f64>,
    pub labels: Vec<String>,
}

/// Item matrix in the panel's own model order.
pub fn item_matrix(panel: &Panel) -> Result<ItemMatrix> {
    item_matrix_for(panel, &panel.model)
}

/// Item matrix with columns in `spec`'s order; `spec` may be a reduced
/// version of the panel's model.
pub fn item_matrix_for(panel: &Panel, spec: &ModelSpec) -> Result<ItemMatrix> {
    if panel.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let own = panel.model.item_names();
    let cols = spec
        .item_names()
        .iter()
        .map(|name| {
            own.iter()
                .position(|o| o == name)
                .ok_or_else(|| Error::UnknownField(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = DMatrix::from_fn(panel.len(), cols.len(), |i, j| panel.rows[i].responses[cols[j]] as f64);
    Ok(ItemMatrix {
        data,
        labels: spec.item_names().iter().map(|s| s.to_string()).collect(),
    })
}
