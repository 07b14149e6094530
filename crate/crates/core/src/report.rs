//! Audit report: the JSON schema and the text/CSV renderings.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::metrics::{
    confusion_csv_rows, render_confusion, GroupLabels, GroupedConfusion, CONFUSION_CSV_HEADER,
};
use crate::path_model::P_FLOOR;

pub const REPORT_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 50;

/// A float serialized with 17 significant digits (`null` if not finite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let text = format!("{:.16e}", self.0);
        let number: serde_json::Number = text
            .parse()
            .map_err(|_| serde::ser::Error::custom(format!("unrepresentable float {text}")))?;
        number.serialize(s)
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FairnessReport {
    pub report_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// otherwise identical runs.
    pub generated_at_unix: u64,
    pub config: ConfigEcho,
    pub schema_fingerprint: String,
    pub labels: GroupLabels,
    pub scorer: ScorerSummary,
    pub path_model: PathModelBlock,
    pub policy: PolicyBlock,
    pub splits: Vec<SplitReport>,
    pub summary: Vec<SummaryRow>,
    pub plot_data: PlotData,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub train: String,
    pub test: Option<String>,
    pub protected: String,
    pub target: String,
    pub positive_label: String,
    pub negative_label: String,
    pub group1_label: String,
    pub group0_label: String,
    pub dropped: Vec<String>,
    pub alpha: Real,
    pub scorer: String,
    pub external_scores: Option<String>,
    pub external_test_scores: Option<String>,
    pub round_coefficient: Option<u32>,
    pub rank_basis: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScorerSummary {
    pub kind: String,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub deviance: Option<Real>,
    pub coefficient_count: Option<usize>,
    pub dropped_columns: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: Real,
    pub std_error: Real,
    pub z: Option<Real>,
    pub p: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathModelBlock {
    pub n_used: usize,
    pub score_equation: Vec<CoefficientRow>,
    pub target_equation: Vec<CoefficientRow>,
    pub var_e_yhat: Real,
    pub var_e_y: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyBlock {
    pub bias_coefficient: Real,
    pub fitted_coefficient: Real,
    pub round_coefficient: Option<u32>,
    pub raw_threshold: Real,
    pub mitigated_threshold: Real,
    pub threshold_rank: usize,
    pub rank_basis: String,
    pub raw_ties: usize,
    pub mitigated_ties: usize,
    pub alpha: Real,
    pub biased: bool,
    pub z: Option<Real>,
    pub p: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub variant: String,
    pub threshold: Real,
    pub confusion: GroupedConfusion,
    pub positives: u64,
    pub eo_rate_group0: Option<Real>,
    pub eo_rate_group1: Option<Real>,
    pub eo_gap: Option<Real>,
    pub accuracy: Option<Real>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub split: String,
    pub rows: usize,
    pub valid_rows: usize,
    pub excluded_rows: usize,
    /// Valid rows masked because they use a category unseen at fit time.
    pub unsupported_rows: usize,
    pub variants: Vec<VariantReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub split: String,
    pub variant: String,
    pub threshold: Real,
    pub eo_rate_group0: Option<Real>,
    pub eo_rate_group1: Option<Real>,
    pub eo_gap: Option<Real>,
    pub accuracy: Option<Real>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub split: String,
    pub variant: String,
    pub group: u8,
    pub lo: Real,
    pub hi: Real,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotData {
    pub bins: usize,
    pub histograms: Vec<Histogram>,
}

/// Histograms over `[lo, hi]` with `bins` equal-width bins; the top edge is
/// inclusive.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize
        } else {
            0
        };
        counts[idx] += 1;
    }
    counts
}

fn fmt_opt(v: Option<Real>, digits: usize) -> String {
    v.map_or("n/a".to_string(), |r| format!("{:.*}", digits, r.0))
}

fn fmt_p(p: f64) -> String {
    if p <= P_FLOOR {
        "< 1e-300".to_string()
    } else if p < 0.001 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

impl FairnessReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The path-model block laid out as a coefficient table.
    pub fn render_path_model(&self) -> String {
        let pm = &self.path_model;
        let mut out = String::new();
        let _ = writeln!(out, "Path analysis (n_used = {})", pm.n_used);
        let row = |out: &mut String, c: &CoefficientRow| {
            let _ = writeln!(
                out,
                "  {:<12} {:>12.6} {:>12.6} {:>12} {:>12}",
                c.name,
                c.estimate.0,
                c.std_error.0,
                fmt_opt(c.z, 3),
                fmt_p(c.p.0)
            );
        };
        let _ = writeln!(out, "  score ~ 1 + a + y");
        let _ = writeln!(
            out,
            "  {:<12} {:>12} {:>12} {:>12} {:>12}",
            "coefficient", "estimate", "std.err", "z-value", "p"
        );
        for c in &pm.score_equation {
            row(&mut out, c);
        }
        let _ = writeln!(out, "  residual variance {:.6}", pm.var_e_yhat.0);
        let _ = writeln!(out, "  y ~ 1 + a");
        for c in &pm.target_equation {
            row(&mut out, c);
        }
        let _ = writeln!(out, "  residual variance {:.6}", pm.var_e_y.0);
        out
    }

    /// Key-value policy dump.
    pub fn render_policy(&self) -> String {
        let p = &self.policy;
        let mut out = String::from("# fairpath mitigation policy\n");
        let _ = writeln!(out, "schema_fingerprint = {}", self.schema_fingerprint);
        let _ = writeln!(out, "bias_coefficient = {:?}", p.bias_coefficient.0);
        let _ = writeln!(out, "fitted_coefficient = {:?}", p.fitted_coefficient.0);
        let _ = writeln!(
            out,
            "round_coefficient = {}",
            p.round_coefficient
                .map_or("off".to_string(), |d| d.to_string())
        );
        let _ = writeln!(out, "raw_threshold = {:?}", p.raw_threshold.0);
        let _ = writeln!(out, "mitigated_threshold = {:?}", p.mitigated_threshold.0);
        let _ = writeln!(out, "threshold_rank = {}", p.threshold_rank);
        let _ = writeln!(out, "rank_basis = {}", p.rank_basis);
        let _ = writeln!(out, "alpha = {:?}", p.alpha.0);
        let _ = writeln!(out, "biased = {}", p.biased);
        let _ = writeln!(
            out,
            "z = {}",
            p.z.map_or("n/a".to_string(), |z| format!("{:?}", z.0))
        );
        let _ = writeln!(out, "p = {:?}", p.p.0);
        out
    }

    /// All confusion tables as CSV.
    pub fn render_confusion_csv(&self) -> String {
        let mut out = format!("{CONFUSION_CSV_HEADER}\n");
        for s in &self.splits {
            for v in &s.variants {
                out.push_str(&confusion_csv_rows(&s.split, &v.variant, &v.confusion));
            }
        }
        out
    }

    /// Human-readable tables: path model, policy, one confusion table per
    /// split and variant, and the accuracy/equal-opportunity summary.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "fairpath {} audit (schema {})\n",
            self.tool_version, self.schema_fingerprint
        );
        out.push_str(&self.render_path_model());
        let p = &self.policy;
        let _ = writeln!(
            out,
            "\nBias test on a -> score: {} at alpha = {} (z = {}, p {})",
            if p.biased {
                "SIGNIFICANT"
            } else {
                "not significant"
            },
            p.alpha.0,
            fmt_opt(p.z, 3),
            match fmt_p(p.p.0) {
                s if s.starts_with('<') => s,
                s => format!("= {s}"),
            }
        );
        let _ = writeln!(
            out,
            "Mitigated score = score - {:.6} * a; thresholds raw {:.4}, mitigated {:.4} (rank {}, {})\n",
            p.bias_coefficient.0,
            p.raw_threshold.0,
            p.mitigated_threshold.0,
            p.threshold_rank,
            p.rank_basis
        );

        for s in &self.splits {
            for v in &s.variants {
                let title = format!(
                    "Classification based on {} scores ({}), threshold {:.4}",
                    v.variant, s.split, v.threshold.0
                );
                out.push_str(&render_confusion(&title, &v.confusion, &self.labels));
                let _ = writeln!(
                    out,
                    "  TPR a=0 {}  TPR a=1 {}  gap {}  accuracy {}",
                    fmt_opt(v.eo_rate_group0, 4),
                    fmt_opt(v.eo_rate_group1, 4),
                    fmt_opt(v.eo_gap, 4),
                    fmt_opt(v.accuracy, 4)
                );
                let _ = writeln!(
                    out,
                    "  classified {} of {} rows ({} excluded, {} positive)\n",
                    v.confusion.n_classified, s.rows, s.excluded_rows, v.positives
                );
            }
        }
        if !self.splits.iter().any(|s| s.split == "test") {
            let _ = writeln!(out, "No test split configured; test tables omitted.\n");
        }

        let _ = writeln!(out, "Summary");
        let _ = writeln!(
            out,
            "  {:<6} {:<10} {:>10} {:>10} {:>10} {:>8} {:>9}",
            "split", "scores", "threshold", "TPR a=0", "TPR a=1", "gap", "accuracy"
        );
        for r in &self.summary {
            let _ = writeln!(
                out,
                "  {:<6} {:<10} {:>10.4} {:>10} {:>10} {:>8} {:>9}",
                r.split,
                r.variant,
                r.threshold.0,
                fmt_opt(r.eo_rate_group0, 4),
                fmt_opt(r.eo_rate_group1, 4),
                fmt_opt(r.eo_gap, 4),
                fmt_opt(r.accuracy, 4)
            );
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_use_seventeen_significant_digits() {
        let v = serde_json::to_string(&Real(0.1)).unwrap();
        assert_eq!(v, "1.0000000000000001e-1");
        assert_eq!(serde_json::to_string(&Real(f64::NAN)).unwrap(), "null");
        let back: f64 = serde_json::from_str(&v).unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn histogram_edges() {
        let c = histogram(&[0.0, 0.5, 1.0, 0.99], 0.0, 1.0, 2);
        assert_eq!(c, [1, 3]);
        assert_eq!(histogram(&[3.0, 3.0], 3.0, 3.0, 4), [2, 0, 0, 0]);
    }

    #[test]
    fn tiny_p_values_render_as_floor() {
        assert_eq!(fmt_p(P_FLOOR), "< 1e-300");
        assert_eq!(fmt_p(0.5), "0.5000");
    }
}
