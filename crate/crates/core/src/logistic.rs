//! Reference black-box scorer: unpenalised logistic regression fitted by
//! iteratively reweighted least squares.
//!
//! The design is `[1, x_1 .. x_p, a]`: the protected attribute is a regular
//! input, as it is for any model trained on all available columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::FairnessDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{sigmoid, softplus, Scalar};
use crate::scores::ScoreSet;

pub const INTERCEPT: &str = "(Intercept)";

/// Linear predictors beyond this magnitude put fitted probabilities within
/// 1e-10 of 0 or 1.
const SATURATED_ETA: f64 = 23.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions<T> {
    pub max_iter: usize,
    /// Converged when the largest absolute coefficient change is below this.
    pub tol: T,
    /// Or when `|Δdeviance| / (|deviance| + 0.1)` is below this.
    pub rel_deviance_tol: T,
    /// Relative ridge added to the weighted Gram matrix only when it is
    /// numerically singular.
    pub ridge: T,
}

impl<T: Scalar> Default for LogisticOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: T::of(1e-8),
            rel_deviance_tol: T::of(1e-10),
            ridge: T::of(1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    names: Vec<String>,
    coefficients: Vec<T>,
    active: Vec<bool>,
    iterations: usize,
    deviance_trace: Vec<T>,
    converged: bool,
    warnings: Vec<String>,
    fingerprint: String,
}

impl<T: Scalar> LogisticModel<T> {
    /// Coefficient names: intercept, encoded features, protected attribute.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Coefficients in [`names`](Self::names) order; dropped columns hold 0.
    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// `false` for columns dropped as constant before fitting.
    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Deviance at the start value and after every iteration.
    pub fn deviance_trace(&self) -> &[T] {
        &self.deviance_trace
    }

    pub fn deviance(&self) -> T {
        *self.deviance_trace.last().expect("trace is never empty")
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    /// A model with the given coefficients over `data`'s design, all columns
    /// active. Mainly useful for tests and for scoring with known weights.
    pub fn from_coefficients(
        data: &FairnessDataset<T>,
        coefficients: Vec<T>,
        protected: &str,
    ) -> Result<Self> {
        let names = design_names(data, protected);
        if names.len() != coefficients.len() {
            return Err(Error::Contract(format!(
                "{} coefficients for a {}-column design",
                coefficients.len(),
                names.len()
            )));
        }
        let k = names.len();
        Ok(Self {
            names,
            coefficients,
            active: vec![true; k],
            iterations: 0,
            deviance_trace: vec![T::nan()],
            converged: true,
            warnings: Vec::new(),
            fingerprint: data.fingerprint().to_string(),
        })
    }

    /// Masks valid rows that have a nonzero value in a column dropped at fit
    /// time (e.g. a category with no valid training rows). Such rows cannot be
    /// scored. Returns the restricted dataset and the newly masked indices.
    pub fn mask_unsupported(&self, data: &FairnessDataset<T>) -> (FairnessDataset<T>, Vec<usize>) {
        let inactive: Vec<usize> = (1..self.names.len() - 1)
            .filter(|&j| !self.active[j])
            .map(|j| j - 1)
            .collect();
        let rows: Vec<usize> = data
            .valid_rows()
            .into_iter()
            .filter(|&i| {
                let r = data.features().row(i);
                inactive.iter().any(|&j| r[j] != T::zero())
            })
            .collect();
        (data.with_rows_masked(&rows), rows)
    }

    /// Text dump of tab-separated name/value pairs; see [`parse_dump`](Self::parse_dump).
    pub fn dump(&self) -> String {
        let mut out = String::from("# fairpath logistic model\n");
        let _ = writeln!(out, "schema_fingerprint\t{}", self.fingerprint);
        let _ = writeln!(out, "iterations\t{}", self.iterations);
        let _ = writeln!(out, "converged\t{}", self.converged);
        let _ = writeln!(out, "deviance\t{}", self.deviance().as_f64());
        for ((name, c), active) in self.names.iter().zip(&self.coefficients).zip(&self.active) {
            if *active {
                let _ = writeln!(out, "coef\t{name}\t{}", c.as_f64());
            } else {
                let _ = writeln!(out, "coef\t{name}\tdropped");
            }
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Config(format!("model dump: malformed line {line:?}"));
        let mut fingerprint = None;
        let mut iterations = 0;
        let mut converged = true;
        let mut deviance = T::nan();
        let mut names = Vec::new();
        let mut coefficients = Vec::new();
        let mut active = Vec::new();
        for line in text.lines() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                ["schema_fingerprint", fp] => fingerprint = Some(fp.to_string()),
                ["iterations", v] => iterations = v.parse().map_err(|_| bad(line))?,
                ["converged", v] => converged = v.parse().map_err(|_| bad(line))?,
                ["deviance", v] => deviance = T::of(v.parse().map_err(|_| bad(line))?),
                ["coef", name, "dropped"] => {
                    names.push(name.to_string());
                    coefficients.push(T::zero());
                    active.push(false);
                }
                ["coef", name, v] => {
                    names.push(name.to_string());
                    coefficients.push(T::of(v.parse().map_err(|_| bad(line))?));
                    active.push(true);
                }
                _ => return Err(bad(line)),
            }
        }
        if names.len() < 2 || names[0] != INTERCEPT {
            return Err(Error::Config(
                "model dump: needs an intercept and a protected coefficient".into(),
            ));
        }
        Ok(Self {
            names,
            coefficients,
            active,
            iterations,
            deviance_trace: vec![deviance],
            converged,
            warnings: Vec::new(),
            fingerprint: fingerprint
                .ok_or_else(|| Error::Config("model dump: no schema_fingerprint".into()))?,
        })
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_dump(&text)
    }
}

fn design_names<T: Scalar>(data: &FairnessDataset<T>, protected: &str) -> Vec<String> {
    let mut names = Vec::with_capacity(data.features().cols() + 2);
    names.push(INTERCEPT.to_string());
    names.extend(data.feature_names().iter().cloned());
    names.push(protected.to_string());
    names
}

/// Augmented design row `[1, x.., a]` of a valid row.
fn design_row<T: Scalar>(data: &FairnessDataset<T>, row: usize, out: &mut Vec<T>) {
    out.clear();
    out.push(T::one());
    out.extend_from_slice(data.features().row(row));
    out.push(T::from_count(data.a_of(row) as usize));
}

/// Full augmented design and response over the valid rows.
pub fn design_matrix<T: Scalar>(data: &FairnessDataset<T>) -> (Matrix<T>, Vec<T>) {
    let rows = data.valid_rows();
    let k = data.features().cols() + 2;
    let mut flat = Vec::with_capacity(rows.len() * k);
    let mut buf = Vec::with_capacity(k);
    for &i in &rows {
        design_row(data, i, &mut buf);
        flat.extend_from_slice(&buf);
    }
    let y = rows
        .iter()
        .map(|&i| T::from_count(data.y_of(i) as usize))
        .collect();
    (Matrix::from_vec(rows.len(), k, flat), y)
}

/// Bernoulli log-likelihood of `beta` over the augmented design.
pub fn log_likelihood<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> T {
    x.mul_vec(beta)
        .into_iter()
        .zip(y)
        .map(|(eta, &yi)| yi * eta - softplus(eta))
        .sum()
}

/// Gradient of [`log_likelihood`]: `Xᵀ(y − μ)`.
pub fn score_vector<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> Vec<T> {
    let resid: Vec<T> = x
        .mul_vec(beta)
        .into_iter()
        .zip(y)
        .map(|(eta, &yi)| yi - sigmoid(eta))
        .collect();
    x.t_mul_vec(&resid)
}

fn deviance<T: Scalar>(eta: &[T], y: &[T]) -> T {
    let two = T::of(2.0);
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| two * (softplus(e) - yi * e))
        .sum()
}

/// Fits the reference scorer on the valid rows of `data`.
///
/// `protected` names the protected-attribute coefficient. Columns that are
/// constant over the valid rows are dropped with a warning. If the
/// coefficients diverge (separation) the last iterate is returned with a
/// warning; otherwise exhausting `max_iter` is an error.
pub fn fit_logistic<T: Scalar>(
    data: &FairnessDataset<T>,
    protected: &str,
    opts: &LogisticOptions<T>,
) -> Result<LogisticModel<T>> {
    let names = design_names(data, protected);
    let (full_x, y) = design_matrix(data);
    let n = full_x.rows();
    let k_full = full_x.cols();

    let positives = y.iter().filter(|&&v| v == T::one()).count();
    if positives == 0 || positives == n {
        return Err(Error::Degenerate {
            context: "scorer",
            message: "logistic fit needs at least one valid row of each class".into(),
        });
    }

    let mut warnings = Vec::new();
    let mut active = vec![true; k_full];
    for j in 1..k_full {
        let mut col = full_x.column(j);
        let first = col.next().unwrap_or_else(T::zero);
        if col.all(|v| v == first) {
            active[j] = false;
            warnings.push(format!("dropped constant column {:?}", names[j]));
        }
    }
    let cols: Vec<usize> = (0..k_full).filter(|&j| active[j]).collect();
    let k = cols.len();
    let mut flat = Vec::with_capacity(n * k);
    for i in 0..n {
        let r = full_x.row(i);
        flat.extend(cols.iter().map(|&j| r[j]));
    }
    let x = Matrix::from_vec(n, k, flat);

    let mut beta = vec![T::zero(); k];
    let mut eta = vec![T::zero(); n];
    let mut dev = deviance(&eta, &y);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    let mut jitter_warned = false;
    let w_floor = T::of(1e-12);
    let slack = T::of(1e-12);

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let mut w = Vec::with_capacity(n);
        let mut work = Vec::with_capacity(n);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let wi = (mu * (T::one() - mu)).max(w_floor);
            w.push(wi);
            // W z = W η + (y − μ)
            work.push(wi * eta[i] + (y[i] - mu));
        }
        let gram = x.weighted_gram(Some(&w));
        let rhs = x.t_mul_vec(&work);
        let (mut candidate, jittered) = linalg::solve_spd_jittered(&gram, &rhs, opts.ridge)?;
        if jittered && !jitter_warned {
            warnings.push("weighted Gram matrix numerically singular; ridge jitter applied".into());
            jitter_warned = true;
        }

        let mut cand_eta = x.mul_vec(&candidate);
        let mut cand_dev = deviance(&cand_eta, &y);
        let mut halvings = 0;
        while !(cand_dev <= dev + slack * (dev.abs() + T::one())) && halvings < 40 {
            for (c, b) in candidate.iter_mut().zip(&beta) {
                *c = (*c + *b) / T::of(2.0);
            }
            cand_eta = x.mul_vec(&candidate);
            cand_dev = deviance(&cand_eta, &y);
            halvings += 1;
        }
        if !(cand_dev <= dev + slack * (dev.abs() + T::one())) {
            // No descent direction left; keep the current iterate.
            cand_dev = dev;
            candidate = beta.clone();
            cand_eta = eta.clone();
        }

        let step = candidate
            .iter()
            .zip(&beta)
            .map(|(c, b)| (*c - *b).abs())
            .fold(T::zero(), T::max);
        let rel = (dev - cand_dev).abs() / (cand_dev.abs() + T::of(0.1));
        beta = candidate;
        eta = cand_eta;
        dev = cand_dev;
        trace.push(dev);
        if step < opts.tol || rel < opts.rel_deviance_tol {
            converged = true;
            break;
        }
    }

    let saturated = eta.iter().any(|e| e.abs() > T::of(SATURATED_ETA));
    if !converged {
        if saturated {
            warnings.push(format!(
                "coefficients diverging after {iterations} iterations (separation); returning last iterate"
            ));
        } else {
            return Err(Error::NoConvergence {
                iterations,
                deviance: dev.as_f64(),
            });
        }
    } else if saturated {
        warnings.push("fitted probabilities numerically 0 or 1 occurred".into());
    }

    let mut coefficients = vec![T::zero(); k_full];
    for (b, &j) in beta.iter().zip(&cols) {
        coefficients[j] = *b;
    }
    Ok(LogisticModel {
        names,
        coefficients,
        active,
        iterations,
        deviance_trace: trace,
        converged,
        warnings,
        fingerprint: data.fingerprint().to_string(),
    })
}

/// Scores every valid row: `ŷ = sigmoid(β·[1, x, a])`.
///
/// Rows that touch a dropped column must be masked first with
/// [`LogisticModel::mask_unsupported`].
pub fn predict<T: Scalar>(
    model: &LogisticModel<T>,
    data: &FairnessDataset<T>,
) -> Result<ScoreSet<T>> {
    data.check_fingerprint(&model.fingerprint)?;
    if data.features().cols() + 2 != model.coefficients.len() {
        return Err(Error::Contract(format!(
            "model has {} coefficients but the dataset design has {} columns",
            model.coefficients.len(),
            data.features().cols() + 2
        )));
    }
    let mut buf = Vec::new();
    let mut raw = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        if !data.is_valid(i) {
            raw.push(None);
            continue;
        }
        design_row(data, i, &mut buf);
        if buf
            .iter()
            .zip(&model.active)
            .any(|(v, active)| !active && *v != T::zero())
        {
            return Err(Error::Contract(format!(
                "row {i} uses a column dropped at fit time; mask it with mask_unsupported first"
            )));
        }
        raw.push(Some(sigmoid(linalg::dot(&buf, &model.coefficients))));
    }
    ScoreSet::new(raw, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;

    fn dataset(rows: &[(f64, u8, u8)]) -> FairnessDataset<f64> {
        let x = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.0).collect());
        FairnessDataset::new(
            x,
            vec!["x".into()],
            rows.iter().map(|r| Some(r.1)).collect(),
            rows.iter().map(|r| Some(r.2)).collect(),
            vec![true; rows.len()],
            Provenance {
                source: "mem".into(),
                fingerprint: "fp".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn symmetric_four_points_give_zero_coefficients() {
        let d = dataset(&[
            (0.0, 0, 0),
            (0.0, 1, 1),
            (1.0, 0, 0),
            (1.0, 1, 1),
            (0.0, 0, 1),
            (0.0, 1, 0),
            (1.0, 0, 1),
            (1.0, 1, 0),
        ]);
        let m = fit_logistic(&d, "a", &LogisticOptions::default()).unwrap();
        for c in m.coefficients() {
            assert!(c.abs() < 1e-10, "{c}");
        }
    }

    #[test]
    fn zero_coefficients_score_one_half() {
        let d = dataset(&[(0.3, 0, 1), (2.0, 1, 0)]);
        let m = LogisticModel::from_coefficients(&d, vec![0.0; 3], "a").unwrap();
        let s = predict(&m, &d).unwrap();
        assert!(s.raw().iter().all(|v| *v == Some(0.5)));
    }

    #[test]
    fn constant_column_is_dropped_with_warning() {
        let d = dataset(&[
            (1.0, 0, 0),
            (1.0, 1, 1),
            (1.0, 0, 1),
            (1.0, 1, 0),
            (1.0, 1, 1),
        ]);
        let m = fit_logistic(&d, "a", &LogisticOptions::default()).unwrap();
        assert_eq!(m.active(), &[true, false, true]);
        assert_eq!(m.coefficient("x"), Some(0.0));
        assert!(m.warnings().iter().any(|w| w.contains("constant")));
    }

    #[test]
    fn separation_returns_last_iterate_with_warning() {
        let d = dataset(&[(-2.0, 0, 0), (-1.0, 1, 0), (1.0, 0, 1), (2.0, 1, 1)]);
        let m = fit_logistic(&d, "a", &LogisticOptions::default()).unwrap();
        assert!(m
            .warnings()
            .iter()
            .any(|w| w.contains("separation") || w.contains("numerically 0 or 1")));
        assert!(m.coefficient("x").unwrap() > 5.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = dataset(&[(0.0, 0, 1), (1.0, 1, 1)]);
        assert!(fit_logistic(&d, "a", &LogisticOptions::default()).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let d = dataset(&[
            (0.2, 0, 0),
            (1.5, 1, 1),
            (0.7, 0, 1),
            (2.5, 1, 0),
            (3.0, 1, 1),
            (0.1, 0, 0),
        ]);
        let m = fit_logistic(&d, "a", &LogisticOptions::default()).unwrap();
        let back = LogisticModel::<f64>::parse_dump(&m.dump()).unwrap();
        assert_eq!(back.coefficients(), m.coefficients());
        assert_eq!(back.names(), m.names());
        assert_eq!(predict(&back, &d).unwrap(), predict(&m, &d).unwrap());
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let d = dataset(&[(0.0, 0, 0), (1.0, 1, 1)]);
        let mut m = LogisticModel::from_coefficients(&d, vec![0.0; 3], "a").unwrap();
        m.fingerprint = "other".into();
        assert!(matches!(
            predict(&m, &d),
            Err(Error::FingerprintMismatch { .. })
        ));
    }
}
