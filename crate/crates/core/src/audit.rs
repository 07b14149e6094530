//! End-to-end audit: ingest, score, fit the path model, test, mitigate,
//! classify both splits and report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::{AuditConfig, ScorerChoice};
use crate::dataset::FairnessDataset;
use crate::encoding::{build_schema, encode, EncodingSchema};
use crate::error::{Error, Result};
use crate::ingest::{load_adult_csv, Variant};
use crate::logistic::{fit_logistic, predict, LogisticModel};
use crate::metrics::{
    accuracy, equal_opportunity, grouped_confusion, GroupLabels, GroupedConfusion,
};
use crate::mitigation::{
    apply_mitigation, classify, derive_policy, ClassifiedScores, MitigationPolicy,
};
use crate::path_model::{fit_path_model, test_bias, BiasVerdict, Coefficient, PathModelFit};
use crate::report::{
    histogram, CoefficientRow, ConfigEcho, FairnessReport, Histogram, PathModelBlock, PlotData,
    PolicyBlock, Real, ScorerSummary, SplitReport, SummaryRow, VariantReport, HISTOGRAM_BINS,
    REPORT_VERSION,
};
use crate::scores::{load_external_scores, ScoreSet, ScoreVariant};

/// Everything computed for one split.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub name: &'static str,
    pub data: FairnessDataset<f64>,
    /// Raw and mitigated scores.
    pub scores: ScoreSet<f64>,
    pub raw_classes: ClassifiedScores<f64>,
    pub mitigated_classes: ClassifiedScores<f64>,
    pub raw_confusion: GroupedConfusion,
    pub mitigated_confusion: GroupedConfusion,
    pub unsupported_rows: Vec<usize>,
}

/// Result of [`run_audit`], with the intermediate artifacts kept for callers
/// that need more than the report.
#[derive(Debug, Clone)]
pub struct AuditRun {
    pub report: FairnessReport,
    pub schema: EncodingSchema,
    pub model: Option<LogisticModel<f64>>,
    pub fit: PathModelFit<f64>,
    pub verdict: BiasVerdict<f64>,
    pub policy: MitigationPolicy<f64>,
    pub train: SplitRun,
    pub test: Option<SplitRun>,
}

impl AuditRun {
    /// Writes `report.json`, `tables.txt`, `tables.csv`, `policy.txt`,
    /// `schema.txt` and, for the built-in scorer, `model.txt`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: &str| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(path, e))
        };
        write("report.json", &self.report.to_json())?;
        write("tables.txt", &self.report.render_tables())?;
        write("tables.csv", &self.report.render_confusion_csv())?;
        write("policy.txt", &self.report.render_policy())?;
        write("schema.txt", &self.schema.dump())?;
        if let Some(model) = &self.model {
            write("model.txt", &model.dump())?;
        }
        Ok(())
    }
}

fn labels(config: &AuditConfig) -> GroupLabels {
    GroupLabels {
        a0: config.schema.group0_label.clone(),
        a1: config.schema.group1_label.clone(),
        y0: config.schema.negative_label.clone(),
        y1: config.schema.positive_label.clone(),
    }
}

fn split_run(
    name: &'static str,
    data: FairnessDataset<f64>,
    raw: ScoreSet<f64>,
    policy: &MitigationPolicy<f64>,
    unsupported_rows: Vec<usize>,
) -> Result<SplitRun> {
    let scores = apply_mitigation(&raw, &data, policy)?;
    let raw_classes = classify(&scores, ScoreVariant::Raw, policy.raw_threshold)?;
    let mitigated_classes = classify(&scores, ScoreVariant::Mitigated, policy.mitigated_threshold)?;
    let raw_confusion = grouped_confusion(&data, &raw_classes)?;
    let mitigated_confusion = grouped_confusion(&data, &mitigated_classes)?;
    Ok(SplitRun {
        name,
        data,
        scores,
        raw_classes,
        mitigated_classes,
        raw_confusion,
        mitigated_confusion,
        unsupported_rows,
    })
}

/// Runs the full pipeline described by `config`. Output files are written
/// when `config.out_dir` is set.
pub fn run_audit(config: &AuditConfig) -> Result<AuditRun> {
    config.validate()?;
    let train_raw = load_adult_csv(&config.train, Variant::Train)?;
    let test_raw = config
        .test
        .as_ref()
        .map(|p| load_adult_csv(p, Variant::Test))
        .transpose()?;
    let schema = build_schema(&train_raw, &config.schema)?;
    let train_data: FairnessDataset<f64> = encode(&train_raw, &schema)?;
    let test_data: Option<FairnessDataset<f64>> =
        test_raw.as_ref().map(|t| encode(t, &schema)).transpose()?;

    let mut notes = Vec::new();
    let (model, train_data, train_scores, train_unsupported, test_part) = match &config.scorer {
        ScorerChoice::BuiltinLogistic => {
            let model = fit_logistic(&train_data, &config.schema.protected, &config.logistic)?;
            let (train_data, train_unsupported) = model.mask_unsupported(&train_data);
            let train_scores = predict(&model, &train_data)?;
            let test_part = match test_data {
                Some(d) => {
                    let (d, unsupported) = model.mask_unsupported(&d);
                    let s = predict(&model, &d)?;
                    Some((d, s, unsupported))
                }
                None => None,
            };
            (
                Some(model),
                train_data,
                train_scores,
                train_unsupported,
                test_part,
            )
        }
        ScorerChoice::External { train, test } => {
            let train_scores = load_external_scores(train, &train_data)?;
            let test_part = match (test_data, test) {
                (Some(d), Some(path)) => {
                    let s = load_external_scores(path, &d)?;
                    Some((d, s, Vec::new()))
                }
                (Some(_), None) => {
                    return Err(Error::Config(
                        "test split configured without external test scores".into(),
                    ))
                }
                (None, _) => None,
            };
            (None, train_data, train_scores, Vec::new(), test_part)
        }
    };

    let fit = fit_path_model(train_data.a(), train_data.y(), train_scores.raw())?;
    let verdict = test_bias(&fit, config.alpha);
    let policy = derive_policy(&fit, &verdict, &train_scores, &train_data, &config.policy)?;
    if !verdict.biased {
        notes.push("bias path not significant; mitigation policy is the identity".into());
    }
    if policy.raw_ties > 1 || policy.mitigated_ties > 1 {
        notes.push(format!(
            "ties at the threshold rank (raw {}, mitigated {}); predicted-negative counts may differ from the rank",
            policy.raw_ties, policy.mitigated_ties
        ));
    }

    let train = split_run(
        "train",
        train_data,
        train_scores,
        &policy,
        train_unsupported,
    )?;
    let test = test_part
        .map(|(d, s, u)| split_run("test", d, s, &policy, u))
        .transpose()?;

    let report = build_report(
        config,
        &schema,
        model.as_ref(),
        &fit,
        &policy,
        &train,
        test.as_ref(),
        notes,
    );
    let run = AuditRun {
        report,
        schema,
        model,
        fit,
        verdict,
        policy,
        train,
        test,
    };
    if let Some(dir) = &config.out_dir {
        run.write_outputs(dir)?;
    }
    Ok(run)
}

fn coefficient_row(c: &Coefficient<f64>) -> CoefficientRow {
    CoefficientRow {
        name: c.name.to_string(),
        estimate: Real(c.estimate),
        std_error: Real(c.std_error),
        z: c.z.map(Real),
        p: Real(c.p),
    }
}

fn variant_report(variant: ScoreVariant, threshold: f64, conf: &GroupedConfusion) -> VariantReport {
    let eo = equal_opportunity(conf);
    VariantReport {
        variant: variant.name().to_string(),
        threshold: Real(threshold),
        confusion: *conf,
        positives: (0..2)
            .flat_map(|a| (0..2).map(move |y| (a, y)))
            .map(|(a, y)| conf.cells[a][y][1])
            .sum(),
        eo_rate_group0: eo.rate0.map(Real),
        eo_rate_group1: eo.rate1.map(Real),
        eo_gap: eo.gap.map(Real),
        accuracy: accuracy(conf).map(Real),
    }
}

fn histograms(split: &SplitRun) -> Vec<Histogram> {
    let mut out = Vec::new();
    for variant in [ScoreVariant::Raw, ScoreVariant::Mitigated] {
        let values = split
            .scores
            .variant(variant)
            .expect("mitigated scores are attached by split_run");
        let present: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect();
        if present.is_empty() {
            continue;
        }
        let lo = present.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = present
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max);
        for group in 0..2u8 {
            let vals: Vec<f64> = present
                .iter()
                .filter(|(i, _)| split.data.a_of(*i) == group)
                .map(|p| p.1)
                .collect();
            out.push(Histogram {
                split: split.name.to_string(),
                variant: variant.name().to_string(),
                group,
                lo: Real(lo),
                hi: Real(hi),
                counts: histogram(&vals, lo, hi, HISTOGRAM_BINS),
            });
        }
    }
    out
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    config: &AuditConfig,
    schema: &EncodingSchema,
    model: Option<&LogisticModel<f64>>,
    fit: &PathModelFit<f64>,
    policy: &MitigationPolicy<f64>,
    train: &SplitRun,
    test: Option<&SplitRun>,
    notes: Vec<String>,
) -> FairnessReport {
    let (external_scores, external_test_scores) = match &config.scorer {
        ScorerChoice::External { train, test } => (
            Some(path_str(train)),
            test.as_ref().map(|p: &PathBuf| path_str(p)),
        ),
        ScorerChoice::BuiltinLogistic => (None, None),
    };
    let config_echo = ConfigEcho {
        train: path_str(&config.train),
        test: config.test.as_deref().map(path_str),
        protected: config.schema.protected.clone(),
        target: config.schema.target.clone(),
        positive_label: config.schema.positive_label.clone(),
        negative_label: config.schema.negative_label.clone(),
        group1_label: config.schema.group1_label.clone(),
        group0_label: config.schema.group0_label.clone(),
        dropped: config.schema.dropped.clone(),
        alpha: Real(config.alpha),
        scorer: match config.scorer {
            ScorerChoice::BuiltinLogistic => "builtin-logistic".into(),
            ScorerChoice::External { .. } => "external".into(),
        },
        external_scores,
        external_test_scores,
        round_coefficient: config.policy.round_coefficient,
        rank_basis: config.policy.rank_basis.name().into(),
        seed: config.seed,
    };

    let scorer = match model {
        Some(m) => ScorerSummary {
            kind: "builtin-logistic".into(),
            iterations: Some(m.iterations()),
            converged: Some(m.converged()),
            deviance: Some(Real(m.deviance())),
            coefficient_count: Some(m.coefficients().len()),
            dropped_columns: m
                .names()
                .iter()
                .zip(m.active())
                .filter(|(_, a)| !**a)
                .map(|(n, _)| n.clone())
                .collect(),
            warnings: m.warnings().to_vec(),
        },
        None => ScorerSummary {
            kind: "external".into(),
            iterations: None,
            converged: None,
            deviance: None,
            coefficient_count: None,
            dropped_columns: Vec::new(),
            warnings: Vec::new(),
        },
    };

    let path_model = PathModelBlock {
        n_used: fit.n_used,
        score_equation: fit.score_equation.iter().map(coefficient_row).collect(),
        target_equation: fit.target_equation.iter().map(coefficient_row).collect(),
        var_e_yhat: Real(fit.var_e_yhat),
        var_e_y: Real(fit.var_e_y),
    };

    let policy_block = PolicyBlock {
        bias_coefficient: Real(policy.bias_coefficient),
        fitted_coefficient: Real(policy.fitted_coefficient),
        round_coefficient: policy.round_coefficient,
        raw_threshold: Real(policy.raw_threshold),
        mitigated_threshold: Real(policy.mitigated_threshold),
        threshold_rank: policy.threshold_rank,
        rank_basis: policy.rank_basis.name().into(),
        raw_ties: policy.raw_ties,
        mitigated_ties: policy.mitigated_ties,
        alpha: Real(policy.verdict.alpha),
        biased: policy.verdict.biased,
        z: policy.verdict.z.map(Real),
        p: Real(policy.verdict.p),
    };

    let mut splits = Vec::new();
    let mut summary = Vec::new();
    let mut plots = Vec::new();
    let mut notes = notes;
    for s in std::iter::once(train).chain(test) {
        let variants = vec![
            variant_report(ScoreVariant::Raw, policy.raw_threshold, &s.raw_confusion),
            variant_report(
                ScoreVariant::Mitigated,
                policy.mitigated_threshold,
                &s.mitigated_confusion,
            ),
        ];
        for (v, conf) in variants
            .iter()
            .zip([&s.raw_confusion, &s.mitigated_confusion])
        {
            if let Some(note) = equal_opportunity(conf).note() {
                notes.push(format!("{} {}: {note}", s.name, v.variant));
            }
            summary.push(SummaryRow {
                split: s.name.to_string(),
                variant: v.variant.clone(),
                threshold: v.threshold,
                eo_rate_group0: v.eo_rate_group0,
                eo_rate_group1: v.eo_rate_group1,
                eo_gap: v.eo_gap,
                accuracy: v.accuracy,
            });
        }
        let valid = s.data.valid_count();
        splits.push(SplitReport {
            split: s.name.to_string(),
            rows: s.data.len(),
            valid_rows: valid,
            excluded_rows: s.data.len() - valid,
            unsupported_rows: s.unsupported_rows.len(),
            variants,
        });
        plots.extend(histograms(s));
    }

    FairnessReport {
        report_version: REPORT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        config: config_echo,
        schema_fingerprint: schema.fingerprint(),
        labels: labels(config),
        scorer,
        path_model,
        policy: policy_block,
        splits,
        summary,
        plot_data: PlotData {
            bins: HISTOGRAM_BINS,
            histograms: plots,
        },
        notes,
    }
}
