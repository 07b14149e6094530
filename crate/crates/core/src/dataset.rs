use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Where a dataset came from and which schema encoded it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub fingerprint: String,
}

/// Encoded feature table with a binary protected attribute `a` and a binary
/// target `y`.
///
/// Invalid rows are retained (so row indices line up with the raw file) but
/// flagged in `row_mask`; every fit and metric only looks at valid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessDataset<T> {
    x: Matrix<T>,
    feature_names: Vec<String>,
    a: Vec<Option<u8>>,
    y: Vec<Option<u8>>,
    row_mask: Vec<bool>,
    provenance: Provenance,
}

impl<T: Scalar> FairnessDataset<T> {
    pub fn new(
        x: Matrix<T>,
        feature_names: Vec<String>,
        a: Vec<Option<u8>>,
        y: Vec<Option<u8>>,
        row_mask: Vec<bool>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = x.rows();
        if a.len() != n || y.len() != n || row_mask.len() != n {
            return Err(Error::Contract(
                "dataset columns have unequal lengths".into(),
            ));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::Contract(
                "feature name count differs from feature column count".into(),
            ));
        }
        for i in 0..n {
            if !row_mask[i] {
                continue;
            }
            let binary = |v: Option<u8>| matches!(v, Some(0 | 1));
            if !binary(a[i]) || !binary(y[i]) {
                return Err(Error::Contract(format!(
                    "row {i} is marked valid but a or y is not 0/1"
                )));
            }
            if x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract(format!(
                    "row {i} is marked valid but has a missing feature"
                )));
            }
        }
        Ok(Self {
            x,
            feature_names,
            a,
            y,
            row_mask,
            provenance,
        })
    }

    /// A dataset with no features, every row valid. Handy for external scores
    /// and synthetic data.
    pub fn from_labels(a: Vec<u8>, y: Vec<u8>, provenance: Provenance) -> Result<Self> {
        let n = a.len();
        Self::new(
            Matrix::zeros(n, 0),
            Vec::new(),
            a.into_iter().map(Some).collect(),
            y.into_iter().map(Some).collect(),
            vec![true; n],
            provenance,
        )
    }

    /// Number of rows, valid or not.
    pub fn len(&self) -> usize {
        self.row_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_mask.is_empty()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn a(&self) -> &[Option<u8>] {
        &self.a
    }

    pub fn y(&self) -> &[Option<u8>] {
        &self.y
    }

    pub fn row_mask(&self) -> &[bool] {
        &self.row_mask
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.row_mask[row]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn fingerprint(&self) -> &str {
        &self.provenance.fingerprint
    }

    /// Indices of valid rows, ascending.
    pub fn valid_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.row_mask[i]).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.row_mask.iter().filter(|&&m| m).count()
    }

    /// Protected value of a valid row.
    pub fn a_of(&self, row: usize) -> u8 {
        self.a[row].expect("valid rows carry a protected value")
    }

    /// Target value of a valid row.
    pub fn y_of(&self, row: usize) -> u8 {
        self.y[row].expect("valid rows carry a target value")
    }

    /// Count of rows, valid or not, whose target is present and equal to 0.
    pub fn raw_negative_count(&self) -> usize {
        self.y.iter().filter(|v| **v == Some(0)).count()
    }

    /// Count of valid rows whose target is 0.
    pub fn valid_negative_count(&self) -> usize {
        (0..self.len())
            .filter(|&i| self.row_mask[i] && self.y[i] == Some(0))
            .count()
    }

    /// Copy of this dataset with the given rows additionally masked.
    pub fn with_rows_masked(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        for &r in rows {
            out.row_mask[r] = false;
        }
        out
    }

    pub(crate) fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.provenance.fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected: expected.to_string(),
                found: self.provenance.fingerprint.clone(),
            });
        }
        Ok(())
    }
}
