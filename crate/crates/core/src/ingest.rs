//! Loading raw Adult-format tables.
//!
//! Accepts the UCI Adult files as distributed (headerless, `", "`-separated,
//! `?` for missing, a `|` banner line and trailing `.` on test labels) as well
//! as ordinary CSV files with a header row.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Column names of the UCI Adult files, in file order.
pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

/// The token that marks a missing cell.
pub const MISSING_TOKEN: &str = "?";

/// Which half of a train/test split a file holds. The test variant strips a
/// trailing `.` from the last column (`">50K."` becomes `">50K"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Train,
    Test,
}

/// Untyped table of optional text cells. `None` is a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    column_names: Vec<String>,
    rows: Vec<Vec<Option<String>>>,
    source: PathBuf,
}

impl RawTable {
    /// Builds a table, checking that names are unique and rows rectangular.
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<Option<String>>>,
        source: impl Into<PathBuf>,
    ) -> Result<Self> {
        let source = source.into();
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Ingest(format!("duplicate column name {name:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(Error::RaggedRow {
                    path: source,
                    row: i,
                    expected: column_names.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self {
            column_names,
            rows,
            source,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }
}

/// Loads an Adult-format file.
///
/// A header row is recognised when every cell of the first record is
/// non-numeric text; otherwise the file must have the 15 Adult columns and
/// [`ADULT_COLUMNS`] is used as the header.
pub fn load_adult_csv(path: impl AsRef<Path>, variant: Variant) -> Result<RawTable> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_adult_text(&text, variant, path)
}

/// Parses Adult-format text; `source` is only used in messages and provenance.
pub fn parse_adult_text(text: &str, variant: Variant, source: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'|'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Ingest(format!("{}: {e}", source.display())))?;
        // A lone empty field is a blank line (the UCI files end with one).
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }

    let (header, body) = match records.first() {
        Some(first) if looks_like_header(first) => (first.clone(), &records[1..]),
        Some(first) if first.len() == ADULT_COLUMNS.len() => (
            ADULT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            &records[..],
        ),
        Some(first) => {
            return Err(Error::Ingest(format!(
                "{}: headerless file has {} columns, expected the {} Adult columns",
                source.display(),
                first.len(),
                ADULT_COLUMNS.len()
            )))
        }
        None => (
            ADULT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            &records[..],
        ),
    };

    let last = header.len().saturating_sub(1);
    let mut rows = Vec::with_capacity(body.len());
    for (i, rec) in body.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                path: source.to_path_buf(),
                row: i,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if cell == MISSING_TOKEN {
                    return None;
                }
                let cell = match variant {
                    Variant::Test if j == last => cell.strip_suffix('.').unwrap_or(cell),
                    _ => cell.as_str(),
                };
                Some(cell.to_owned())
            })
            .collect();
        rows.push(row);
    }
    RawTable::new(header, rows, source)
}

fn looks_like_header(record: &[String]) -> bool {
    !record.is_empty()
        && record
            .iter()
            .all(|c| !c.is_empty() && c != MISSING_TOKEN && c.parse::<f64>().is_err())
}
