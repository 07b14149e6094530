//! Per-row classifier scores and the external score-file format.
//!
//! Score files are CSV with the header `row_index,score`, where `row_index`
//! is the 0-based index of the row in the raw data file. Explicit indices keep
//! masked rows from shifting scores onto the wrong record.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::FairnessDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreVariant {
    /// Black-box scores `ŷ`.
    Raw,
    /// Scores after removing the protected-attribute path effect.
    Mitigated,
}

impl ScoreVariant {
    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::Raw => "raw",
            ScoreVariant::Mitigated => "mitigated",
        }
    }
}

/// Scores aligned row-for-row with a [`FairnessDataset`]; absent on masked rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<T> {
    raw: Vec<Option<T>>,
    mitigated: Option<Vec<Option<T>>>,
    fingerprint: String,
}

impl<T: Scalar> ScoreSet<T> {
    /// Wraps raw scores for `data`. Scores must be present exactly on valid rows.
    pub fn new(raw: Vec<Option<T>>, data: &FairnessDataset<T>) -> Result<Self> {
        if raw.len() != data.len() {
            return Err(Error::Contract(format!(
                "{} scores for {} rows",
                raw.len(),
                data.len()
            )));
        }
        for (i, s) in raw.iter().enumerate() {
            match (data.is_valid(i), s) {
                (true, None) => return Err(Error::Contract(format!("valid row {i} has no score"))),
                (false, Some(_)) => {
                    return Err(Error::Contract(format!("masked row {i} carries a score")))
                }
                (true, Some(v)) if !v.is_finite() => {
                    return Err(Error::Contract(format!("row {i} has a non-finite score")))
                }
                _ => {}
            }
        }
        Ok(Self {
            raw,
            mitigated: None,
            fingerprint: data.fingerprint().to_string(),
        })
    }

    pub(crate) fn with_mitigated(mut self, mitigated: Vec<Option<T>>) -> Self {
        debug_assert_eq!(mitigated.len(), self.raw.len());
        self.mitigated = Some(mitigated);
        self
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[Option<T>] {
        &self.raw
    }

    pub fn mitigated(&self) -> Option<&[Option<T>]> {
        self.mitigated.as_deref()
    }

    pub fn variant(&self, variant: ScoreVariant) -> Option<&[Option<T>]> {
        match variant {
            ScoreVariant::Raw => Some(&self.raw),
            ScoreVariant::Mitigated => self.mitigated(),
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Renders raw scores in the external score-file format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_index,score\n");
        for (i, s) in self.raw.iter().enumerate() {
            if let Some(s) = s {
                let _ = writeln!(out, "{i},{}", s.as_f64());
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads an external score file and aligns it with `data`.
pub fn load_external_scores<T: Scalar>(
    path: impl AsRef<Path>,
    data: &FairnessDataset<T>,
) -> Result<ScoreSet<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_scores(&text, data)
}

pub fn parse_external_scores<T: Scalar>(
    text: &str,
    data: &FairnessDataset<T>,
) -> Result<ScoreSet<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Scores(format!("score file header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "row_index" || &headers[1] != "score" {
        return Err(Error::Scores(format!(
            "score file header must be `row_index,score`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut raw: Vec<Option<T>> = vec![None; data.len()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Scores(format!("score file record {line}: {e}")))?;
        let idx: usize = rec[0]
            .parse()
            .map_err(|_| Error::Scores(format!("bad row index {:?}", &rec[0])))?;
        if idx >= data.len() {
            return Err(Error::Scores(format!(
                "row index {idx} out of range (dataset has {} rows)",
                data.len()
            )));
        }
        let score: f64 = rec[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::Scores(format!("row {idx}: non-numeric score {:?}", &rec[1])))?;
        if raw[idx].is_some() {
            return Err(Error::Scores(format!("row {idx} listed twice")));
        }
        // Scores for masked rows are ignored.
        if data.is_valid(idx) {
            raw[idx] = Some(T::of(score));
        }
    }
    if let Some(missing) = (0..data.len()).find(|&i| data.is_valid(i) && raw[i].is_none()) {
        return Err(Error::Scores(format!("no score for valid row {missing}")));
    }
    ScoreSet::new(raw, data)
}
