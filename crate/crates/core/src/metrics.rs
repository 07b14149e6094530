//! Grouped confusion counts, equal-opportunity rates and accuracy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::FairnessDataset;
use crate::error::{Error, Result};
use crate::mitigation::ClassifiedScores;
use crate::scalar::Scalar;

/// Counts over protected group × true class × predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupedConfusion {
    /// Indexed `[a][y][prediction]`.
    pub cells: [[[u64; 2]; 2]; 2],
    pub n_classified: u64,
    /// Rows of the dataset that were masked or left unclassified.
    pub n_excluded: u64,
}

impl GroupedConfusion {
    pub fn from_cells(cells: [[[u64; 2]; 2]; 2], n_excluded: u64) -> Self {
        let n_classified = cells.iter().flatten().flatten().sum();
        Self {
            cells,
            n_classified,
            n_excluded,
        }
    }

    pub fn cell(&self, a: usize, y: usize, pred: usize) -> u64 {
        self.cells[a][y][pred]
    }

    pub fn correct(&self) -> u64 {
        (0..2)
            .map(|a| self.cells[a][0][0] + self.cells[a][1][1])
            .sum()
    }
}

type Cells = [[[u64; 2]; 2]; 2];

/// Tallies valid, classified rows into the eight cells.
pub fn grouped_confusion<T: Scalar>(
    data: &FairnessDataset<T>,
    classes: &ClassifiedScores<T>,
) -> Result<GroupedConfusion> {
    data.check_fingerprint(&classes.fingerprint)?;
    if classes.classes.len() != data.len() {
        return Err(Error::Contract(
            "classifications and dataset differ in length".into(),
        ));
    }
    let mut cells = [[[0u64; 2]; 2]; 2];
    let mut excluded = 0;
    for (i, c) in classes.classes.iter().enumerate() {
        match (data.is_valid(i), c) {
            (true, Some(p)) => {
                cells[data.a_of(i) as usize][data.y_of(i) as usize][*p as usize] += 1;
            }
            _ => excluded += 1,
        }
    }
    Ok(GroupedConfusion::from_cells(cells, excluded))
}

/// True-positive rate per protected group and the absolute gap between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualOpportunity {
    /// `Pr{pred = 1 | a = 0, y = 1}`; absent when that stratum is empty.
    pub rate0: Option<f64>,
    /// `Pr{pred = 1 | a = 1, y = 1}`; absent when that stratum is empty.
    pub rate1: Option<f64>,
    pub gap: Option<f64>,
}

impl EqualOpportunity {
    /// Explains absent rates, if any.
    pub fn note(&self) -> Option<String> {
        let mut empty = Vec::new();
        if self.rate0.is_none() {
            empty.push("a=0");
        }
        if self.rate1.is_none() {
            empty.push("a=1");
        }
        (!empty.is_empty()).then(|| {
            format!(
                "no rows with y=1 in group {}; equal-opportunity rate undefined",
                empty.join(" and ")
            )
        })
    }
}

pub fn equal_opportunity(conf: &GroupedConfusion) -> EqualOpportunity {
    let rate = |g: usize| {
        let hit = conf.cells[g][1][1];
        let total = conf.cells[g][1][0] + hit;
        (total > 0).then(|| hit as f64 / total as f64)
    };
    let rate0 = rate(0);
    let rate1 = rate(1);
    EqualOpportunity {
        rate0,
        rate1,
        gap: rate0.zip(rate1).map(|(r0, r1)| (r1 - r0).abs()),
    }
}

/// Share of classified rows whose prediction equals the target; `None` when
/// nothing was classified.
pub fn accuracy(conf: &GroupedConfusion) -> Option<f64> {
    (conf.n_classified > 0).then(|| conf.correct() as f64 / conf.n_classified as f64)
}

/// Aligned text layout: one row per (a, y) stratum, one column per prediction.
pub fn render_confusion(title: &str, conf: &GroupedConfusion, labels: &GroupLabels) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:<12} {:<12} {:>14} {:>14}",
        "a",
        "y",
        format!("pred {}", labels.y0),
        format!("pred {}", labels.y1)
    );
    for a in 0..2 {
        for y in 0..2 {
            let _ = writeln!(
                out,
                "  {:<12} {:<12} {:>14} {:>14}",
                format!("{} ({a})", labels.a(a)),
                format!("{} ({y})", labels.y(y)),
                conf.cells[a][y][0],
                conf.cells[a][y][1]
            );
        }
    }
    out
}

/// Display labels for the two binary roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabels {
    pub a0: String,
    pub a1: String,
    pub y0: String,
    pub y1: String,
}

impl GroupLabels {
    fn a(&self, v: usize) -> &str {
        if v == 0 {
            &self.a0
        } else {
            &self.a1
        }
    }

    fn y(&self, v: usize) -> &str {
        if v == 0 {
            &self.y0
        } else {
            &self.y1
        }
    }
}

impl Default for GroupLabels {
    fn default() -> Self {
        Self {
            a0: "0".into(),
            a1: "1".into(),
            y0: "0".into(),
            y1: "1".into(),
        }
    }
}

pub const CONFUSION_CSV_HEADER: &str = "split,variant,a,y,pred0,pred1";

/// CSV rows (no header) for one confusion table.
pub fn confusion_csv_rows(split: &str, variant: &str, conf: &GroupedConfusion) -> String {
    let mut out = String::new();
    for a in 0..2 {
        for y in 0..2 {
            let _ = writeln!(
                out,
                "{split},{variant},{a},{y},{},{}",
                conf.cells[a][y][0], conf.cells[a][y][1]
            );
        }
    }
    out
}

/// Parses CSV written with [`CONFUSION_CSV_HEADER`] back into
/// `(split, variant, confusion)` triples, in first-seen order. The excluded
/// count is not part of the CSV and comes back as 0.
pub fn parse_confusion_csv(text: &str) -> Result<Vec<(String, String, GroupedConfusion)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("confusion csv: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CONFUSION_CSV_HEADER {
        return Err(Error::Ingest(format!(
            "confusion csv: unexpected header {header:?}"
        )));
    }
    let mut tables: Vec<(String, String, Cells)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Ingest(format!("confusion csv: {e}")))?;
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Ingest(format!("confusion csv: bad count {:?}", &rec[i])))
        };
        let (a, y) = (num(2)? as usize, num(3)? as usize);
        if a > 1 || y > 1 {
            return Err(Error::Ingest(
                "confusion csv: a and y must be 0 or 1".into(),
            ));
        }
        let key = (rec[0].to_string(), rec[1].to_string());
        let pos = match tables.iter().position(|t| t.0 == key.0 && t.1 == key.1) {
            Some(p) => p,
            None => {
                tables.push((key.0, key.1, [[[0; 2]; 2]; 2]));
                tables.len() - 1
            }
        };
        tables[pos].2[a][y] = [num(4)?, num(5)?];
    }
    Ok(tables
        .into_iter()
        .map(|(s, v, cells)| (s, v, GroupedConfusion::from_cells(cells, 0)))
        .collect())
}
