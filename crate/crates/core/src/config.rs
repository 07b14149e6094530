//! Audit configuration and its key-value file format.
//!
//! ```text
//! # comments start with '#'
//! train = data/adult.data
//! test = data/adult.test
//! alpha = 0.05
//! round-coefficient = 3
//! ```
//!
//! Keys are the long command-line flag names without the leading dashes, so a
//! config file and flags can be merged by applying the file first.

use std::fs;
use std::path::{Path, PathBuf};

use crate::encoding::SchemaConfig;
use crate::error::{Error, Result};
use crate::logistic::LogisticOptions;
use crate::mitigation::{PolicyOptions, RankBasis};

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerChoice {
    /// Fit the reference logistic regression on the training split.
    BuiltinLogistic,
    /// Read scores from `row_index,score` files.
    External {
        train: PathBuf,
        test: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub schema: SchemaConfig,
    pub alpha: f64,
    pub scorer: ScorerChoice,
    pub policy: PolicyOptions,
    pub logistic: LogisticOptions<f64>,
    pub out_dir: Option<PathBuf>,
    /// Echoed in reports. The audit pipeline itself draws no random numbers.
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::from("data/adult.data"),
            test: Some(PathBuf::from("data/adult.test")),
            schema: SchemaConfig::adult(),
            alpha: 0.05,
            scorer: ScorerChoice::BuiltinLogistic,
            policy: PolicyOptions::default(),
            logistic: LogisticOptions::default(),
            out_dir: None,
            seed: 0,
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl AuditConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let opt_path = |v: &str| (!v.is_empty() && v != "none").then(|| PathBuf::from(v));
        match key.trim() {
            "train" => self.train = PathBuf::from(value),
            "test" => self.test = opt_path(value),
            "protected" => self.schema.protected = value.to_string(),
            "target" => self.schema.target = value.to_string(),
            "positive-label" => self.schema.positive_label = value.to_string(),
            "negative-label" => self.schema.negative_label = value.to_string(),
            "group1-label" => self.schema.group1_label = value.to_string(),
            "group0-label" => self.schema.group0_label = value.to_string(),
            "drop" => {
                self.schema.dropped = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "alpha" => self.alpha = parse_num(key, value)?,
            "external-scores" => {
                let test = match &self.scorer {
                    ScorerChoice::External { test, .. } => test.clone(),
                    ScorerChoice::BuiltinLogistic => None,
                };
                self.scorer = match opt_path(value) {
                    Some(train) => ScorerChoice::External { train, test },
                    None => ScorerChoice::BuiltinLogistic,
                };
            }
            "external-test-scores" => match &mut self.scorer {
                ScorerChoice::External { test, .. } => *test = opt_path(value),
                ScorerChoice::BuiltinLogistic => {
                    return Err(Error::Config(
                        "external-test-scores requires external-scores to be set first".into(),
                    ))
                }
            },
            "round-coefficient" => {
                self.policy.round_coefficient = match value {
                    "off" | "none" | "" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "rank-basis" => {
                self.policy.rank_basis = match value {
                    "all-rows" => RankBasis::AllRows,
                    "valid-rows" => RankBasis::ValidRows,
                    other => {
                        return Err(Error::Config(format!(
                            "rank-basis: expected all-rows or valid-rows, got {other:?}"
                        )))
                    }
                }
            }
            "max-iter" => self.logistic.max_iter = parse_num(key, value)?,
            "tol" => self.logistic.tol = parse_num(key, value)?,
            "out" => self.out_dir = opt_path(value),
            "seed" => self.seed = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every setting of a key-value text.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_kv(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.test.as_ref() == Some(&self.train) {
            return Err(Error::Config("train and test paths must differ".into()));
        }
        if let ScorerChoice::External { test: None, .. } = &self.scorer {
            if self.test.is_some() {
                return Err(Error::Config(
                    "external scores need external-test-scores when a test split is configured"
                        .into(),
                ));
            }
        }
        if self.logistic.max_iter == 0 {
            return Err(Error::Config("max-iter must be positive".into()));
        }
        Ok(())
    }
}
