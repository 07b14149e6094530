//! Column typing and numeric encoding of raw tables.
//!
//! Categorical columns use reference-level dummy coding: a column with `L`
//! levels (sorted lexicographically) becomes `L - 1` indicator features and
//! the first level is the reference.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::dataset::{FairnessDataset, Provenance};
use crate::error::{Error, Result};
use crate::ingest::RawTable;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Column roles and label mappings used to build a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaConfig {
    pub protected: String,
    pub target: String,
    /// Target label encoded as 1.
    pub positive_label: String,
    /// Target label encoded as 0.
    pub negative_label: String,
    /// Protected-attribute label encoded as 1.
    pub group1_label: String,
    /// Protected-attribute label encoded as 0.
    pub group0_label: String,
    pub dropped: Vec<String>,
}

impl SchemaConfig {
    /// Defaults for the UCI Adult files: `sex` (Male = 1) and `income`
    /// (`>50K` = 1), dropping `education`, `fnlwgt` and `relationship`.
    pub fn adult() -> Self {
        Self {
            protected: "sex".into(),
            target: "income".into(),
            positive_label: ">50K".into(),
            negative_label: "<=50K".into(),
            group1_label: "Male".into(),
            group0_label: "Female".into(),
            dropped: vec!["education".into(), "fnlwgt".into(), "relationship".into()],
        }
    }

    /// Binary `0`/`1` coding for both roles, nothing dropped.
    pub fn binary(protected: &str, target: &str) -> Self {
        Self {
            protected: protected.into(),
            target: target.into(),
            positive_label: "1".into(),
            negative_label: "0".into(),
            group1_label: "1".into(),
            group0_label: "0".into(),
            dropped: Vec::new(),
        }
    }
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self::adult()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// Deduplicated levels in lexicographic order; the first is the reference.
    Categorical(Vec<String>),
    /// Two labels mapped to 0 and 1.
    Binary {
        zero: String,
        one: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Typed description of how a raw table turns into a [`FairnessDataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingSchema {
    /// Feature columns in table order (protected and target excluded).
    features: Vec<ColumnSpec>,
    protected: ColumnSpec,
    target: ColumnSpec,
    dropped: Vec<String>,
}

impl EncodingSchema {
    pub fn features(&self) -> &[ColumnSpec] {
        &self.features
    }

    pub fn protected(&self) -> &ColumnSpec {
        &self.protected
    }

    pub fn target(&self) -> &ColumnSpec {
        &self.target
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    /// Names of the encoded feature columns, e.g. `age`, `workclass=Private`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.features {
            match &col.kind {
                ColumnKind::Categorical(levels) => {
                    names.extend(levels.iter().skip(1).map(|l| format!("{}={l}", col.name)))
                }
                _ => names.push(col.name.clone()),
            }
        }
        names
    }

    /// Number of encoded features `p`.
    pub fn feature_count(&self) -> usize {
        self.features
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Categorical(levels) => levels.len().saturating_sub(1),
                _ => 1,
            })
            .sum()
    }

    /// Key-value text dump used for audit trails and fingerprinting.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let kind = |c: &ColumnSpec| match &c.kind {
            ColumnKind::Numeric => "numeric".to_string(),
            ColumnKind::Categorical(levels) => format!("categorical:{}", levels.join("|")),
            ColumnKind::Binary { zero, one } => format!("binary:{zero}=0|{one}=1"),
        };
        let _ = writeln!(
            out,
            "protected = {} {}",
            self.protected.name,
            kind(&self.protected)
        );
        let _ = writeln!(out, "target = {} {}", self.target.name, kind(&self.target));
        let _ = writeln!(out, "dropped = {}", self.dropped.join(","));
        for c in &self.features {
            let _ = writeln!(out, "feature.{} = {}", c.name, kind(c));
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`dump`](Self::dump).
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.dump().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Infers column kinds from the training table.
///
/// A column is numeric when every non-missing cell parses as a number;
/// otherwise it is categorical with its levels taken from this table only.
pub fn build_schema(table: &RawTable, config: &SchemaConfig) -> Result<EncodingSchema> {
    let find = |name: &str| {
        table
            .column_index(name)
            .ok_or_else(|| Error::Ingest(format!("column {name:?} not found")))
    };
    let p_idx = find(&config.protected)?;
    let t_idx = find(&config.target)?;
    if p_idx == t_idx {
        return Err(Error::Config(
            "protected and target must be different columns".into(),
        ));
    }
    for d in &config.dropped {
        find(d)?;
        if d == &config.protected || d == &config.target {
            return Err(Error::Config(format!("cannot drop role column {d:?}")));
        }
    }

    let binary = |idx: usize, zero: &str, one: &str| -> Result<ColumnSpec> {
        let name = &table.column_names()[idx];
        let seen: BTreeSet<&str> = (0..table.len())
            .filter_map(|r| table.cell(r, idx))
            .collect();
        if let Some(bad) = seen.iter().find(|l| **l != zero && **l != one) {
            return Err(Error::Ingest(format!(
                "column {name:?} has label {bad:?} outside the configured pair ({zero:?}, {one:?})"
            )));
        }
        if seen.len() != 2 {
            return Err(Error::Ingest(format!(
                "column {name:?} is not binary: observed labels {seen:?}"
            )));
        }
        Ok(ColumnSpec {
            name: name.clone(),
            kind: ColumnKind::Binary {
                zero: zero.to_string(),
                one: one.to_string(),
            },
        })
    };
    let protected = binary(p_idx, &config.group0_label, &config.group1_label)?;
    let target = binary(t_idx, &config.negative_label, &config.positive_label)?;

    let mut features = Vec::new();
    for (idx, name) in table.column_names().iter().enumerate() {
        if idx == p_idx || idx == t_idx || config.dropped.contains(name) {
            continue;
        }
        let cells = || (0..table.len()).filter_map(move |r| table.cell(r, idx));
        let kind = if cells().all(|c| c.parse::<f64>().is_ok()) {
            ColumnKind::Numeric
        } else {
            let levels: BTreeSet<&str> = cells().collect();
            ColumnKind::Categorical(levels.into_iter().map(str::to_owned).collect())
        };
        features.push(ColumnSpec {
            name: name.clone(),
            kind,
        });
    }

    Ok(EncodingSchema {
        features,
        protected,
        target,
        dropped: config.dropped.clone(),
    })
}

/// Encodes a raw table with a schema built from the training table.
///
/// Rows with a missing used cell, or with a categorical level (or binary
/// label) the schema does not know, are kept but masked out.
pub fn encode<T: Scalar>(table: &RawTable, schema: &EncodingSchema) -> Result<FairnessDataset<T>> {
    let idx = |name: &str| {
        table
            .column_index(name)
            .ok_or_else(|| Error::Ingest(format!("schema column {name:?} missing from table")))
    };
    let feature_cols: Vec<(usize, &ColumnSpec)> = schema
        .features
        .iter()
        .map(|c| Ok((idx(&c.name)?, c)))
        .collect::<Result<_>>()?;
    let p_idx = idx(&schema.protected.name)?;
    let t_idx = idx(&schema.target.name)?;

    let n = table.len();
    let p = schema.feature_count();
    let mut x = Matrix::zeros(n, p);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);

    let map_binary = |cell: Option<&str>, spec: &ColumnSpec| -> Option<u8> {
        match (&spec.kind, cell) {
            (ColumnKind::Binary { zero, one }, Some(c)) if c == zero => Some(0),
            (ColumnKind::Binary { zero, one }, Some(c)) if c == one => Some(1),
            _ => None,
        }
    };

    for r in 0..n {
        let ar = map_binary(table.cell(r, p_idx), &schema.protected);
        let yr = map_binary(table.cell(r, t_idx), &schema.target);
        let mut valid = ar.is_some() && yr.is_some();
        let mut j = 0;
        for &(ci, spec) in &feature_cols {
            let cell = table.cell(r, ci);
            match &spec.kind {
                ColumnKind::Numeric => {
                    match cell {
                        Some(c) => {
                            let v: f64 = c.parse().map_err(|_| {
                                Error::Ingest(format!(
                                    "{}: row {r}: column {:?} value {c:?} is not numeric",
                                    table.source().display(),
                                    spec.name
                                ))
                            })?;
                            x[(r, j)] = T::of(v);
                        }
                        None => {
                            x[(r, j)] = T::nan();
                            valid = false;
                        }
                    }
                    j += 1;
                }
                ColumnKind::Categorical(levels) => {
                    let width = levels.len().saturating_sub(1);
                    match cell.map(|c| levels.binary_search_by(|l| l.as_str().cmp(c))) {
                        Some(Ok(0)) => {}
                        Some(Ok(k)) => x[(r, j + k - 1)] = T::one(),
                        Some(Err(_)) | None => {
                            for k in 0..width {
                                x[(r, j + k)] = T::nan();
                            }
                            valid = false;
                        }
                    }
                    j += width;
                }
                ColumnKind::Binary { .. } => {
                    match map_binary(cell, spec) {
                        Some(v) => x[(r, j)] = T::from_count(v as usize),
                        None => {
                            x[(r, j)] = T::nan();
                            valid = false;
                        }
                    }
                    j += 1;
                }
            }
        }
        a.push(ar);
        y.push(yr);
        mask.push(valid);
    }

    FairnessDataset::new(
        x,
        schema.feature_names(),
        a,
        y,
        mask,
        Provenance {
            source: table.source().display().to_string(),
            fingerprint: schema.fingerprint(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_adult_text, Variant};
    use std::path::Path;

    fn table(text: &str) -> RawTable {
        parse_adult_text(text, Variant::Train, Path::new("mem.csv")).unwrap()
    }

    fn cfg() -> SchemaConfig {
        SchemaConfig::binary("a", "y")
    }

    #[test]
    fn levels_are_sorted_and_deduplicated() {
        let t = table("a,y,c\n0,0,b\n1,1,a\n0,1,b\n1,0,a\n");
        let s = build_schema(&t, &cfg()).unwrap();
        assert_eq!(
            s.features()[0].kind,
            ColumnKind::Categorical(vec!["a".into(), "b".into()])
        );
        assert_eq!(s.feature_names(), ["c=b"]);
    }

    #[test]
    fn schema_is_deterministic() {
        let t = table("a,y,c,v\n0,0,z,1.5\n1,1,q,2\n0,1,z,?\n1,0,m,3\n");
        let s1 = build_schema(&t, &cfg()).unwrap();
        let s2 = build_schema(&t, &cfg()).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.fingerprint(), s2.fingerprint());
        assert_eq!(s1.fingerprint().len(), 16);
    }

    #[test]
    fn target_with_foreign_label_is_rejected() {
        let t = table("a,y\n0,0\n1,1\n0,2\n");
        let err = build_schema(&t, &cfg()).unwrap_err();
        assert!(
            err.to_string().contains("outside the configured pair"),
            "{err}"
        );
    }

    #[test]
    fn constant_protected_column_is_rejected() {
        let t = table("a,y\n1,0\n1,1\n");
        let err = build_schema(&t, &cfg()).unwrap_err();
        assert!(err.to_string().contains("not binary"), "{err}");
    }

    #[test]
    fn reference_level_encodes_as_all_zero() {
        let t = table("a,y,c\n0,0,a\n1,1,b\n0,1,c\n");
        let s = build_schema(&t, &cfg()).unwrap();
        let d: FairnessDataset<f64> = encode(&t, &s).unwrap();
        assert_eq!(d.features().row(0), &[0.0, 0.0]);
        assert_eq!(d.features().row(1), &[1.0, 0.0]);
        assert_eq!(d.features().row(2), &[0.0, 1.0]);
    }

    #[test]
    fn numeric_table_passes_through() {
        let t = table("a,y,u,v\n0,0,1.5,-2\n1,1,3,4e2\n");
        let s = build_schema(&t, &cfg()).unwrap();
        let d: FairnessDataset<f64> = encode(&t, &s).unwrap();
        assert!(d.row_mask().iter().all(|&m| m));
        assert_eq!(d.features().as_slice(), &[1.5, -2.0, 3.0, 400.0]);
        assert_eq!(d.a(), &[Some(0), Some(1)]);
        assert_eq!(d.y(), &[Some(0), Some(1)]);
    }

    #[test]
    fn unknown_level_and_missing_cells_mask_rows() {
        let train = table("a,y,w,v\n0,0,Private,1\n1,1,State-gov,2\n");
        let s = build_schema(&train, &cfg()).unwrap();
        let test =
            table("a,y,w,v\n0,1,Never-worked,1\n1,0,Private,?\n0,0,Private,3\n1,?,Private,3\n");
        let d: FairnessDataset<f64> = encode(&test, &s).unwrap();
        assert_eq!(d.row_mask(), &[false, false, true, false]);
        assert_eq!(d.len(), 4);
        assert_eq!(d.y()[3], None);
    }

    #[test]
    fn feature_count_comes_from_schema() {
        let t = table("a,y,c,v\n0,0,x,1\n1,1,y,2\n0,1,z,3\n");
        let s = build_schema(&t, &cfg()).unwrap();
        assert_eq!(s.feature_count(), 3);
        let subset = table("a,y,c,v\n0,0,x,1\n");
        let d: FairnessDataset<f64> = encode(&subset, &s).unwrap();
        assert_eq!(d.features().cols(), 3);
    }

    #[test]
    fn dropped_columns_are_excluded() {
        let t = table("a,y,junk,v\n0,0,x,1\n1,1,y,2\n");
        let mut c = cfg();
        c.dropped = vec!["junk".into()];
        let s = build_schema(&t, &c).unwrap();
        assert_eq!(s.feature_names(), ["v"]);
        assert!(s.dump().contains("dropped = junk"));
    }

    #[test]
    fn non_numeric_value_in_numeric_column_errors() {
        let train = table("a,y,v\n0,0,1\n1,1,2\n");
        let s = build_schema(&train, &cfg()).unwrap();
        let bad = table("a,y,v\n0,0,abc\n");
        assert!(encode::<f64>(&bad, &s).is_err());
    }
}
