//! Bias-mitigation policy: remove the direct protected-attribute path from the
//! scores (`ỹ = ŷ − β_{a,ŷ}·a`) and classify with base-rate rank thresholds.

use std::cmp::Ordering;

use crate::dataset::FairnessDataset;
use crate::error::{Error, Result};
use crate::path_model::{BiasVerdict, PathModelFit};
use crate::scalar::Scalar;
use crate::scores::{ScoreSet, ScoreVariant};

/// Which rows count towards the threshold rank (the number of training
/// negatives).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankBasis {
    /// Every training row with a target value, including rows masked for
    /// missing features. The rank is taken before masking, so the number of
    /// negatives is counted over the full training file.
    #[default]
    AllRows,
    /// Only the valid (scored) training rows.
    ValidRows,
}

impl RankBasis {
    pub fn name(self) -> &'static str {
        match self {
            RankBasis::AllRows => "all-rows",
            RankBasis::ValidRows => "valid-rows",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PolicyOptions {
    pub rank_basis: RankBasis,
    /// Round the subtracted coefficient to this many decimal places.
    pub round_coefficient: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationPolicy<T> {
    /// Coefficient subtracted from the scores of group 1 (0 when the bias
    /// test is not significant).
    pub bias_coefficient: T,
    /// The fitted `β_{a,ŷ}` at full precision, whatever the verdict.
    pub fitted_coefficient: T,
    pub round_coefficient: Option<u32>,
    pub raw_threshold: T,
    pub mitigated_threshold: T,
    pub threshold_rank: usize,
    pub rank_basis: RankBasis,
    /// Training scores equal to the raw threshold.
    pub raw_ties: usize,
    /// Mitigated training scores equal to the mitigated threshold.
    pub mitigated_ties: usize,
    pub verdict: BiasVerdict<T>,
}

impl<T: Scalar> MitigationPolicy<T> {
    pub fn threshold(&self, variant: ScoreVariant) -> T {
        match variant {
            ScoreVariant::Raw => self.raw_threshold,
            ScoreVariant::Mitigated => self.mitigated_threshold,
        }
    }
}

/// Classes obtained by thresholding one score variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedScores<T> {
    /// `Some(1)` when the score is strictly above the threshold, `Some(0)`
    /// otherwise, `None` on masked rows.
    pub classes: Vec<Option<u8>>,
    pub threshold: T,
    pub variant: ScoreVariant,
    pub fingerprint: String,
}

impl<T> ClassifiedScores<T> {
    pub fn positives(&self) -> usize {
        self.classes.iter().filter(|c| **c == Some(1)).count()
    }

    pub fn negatives(&self) -> usize {
        self.classes.iter().filter(|c| **c == Some(0)).count()
    }
}

/// Rounds to `digits` decimal places, half away from zero.
pub fn round_to<T: Scalar>(x: T, digits: u32) -> T {
    let f = T::of(10f64.powi(digits as i32));
    (x * f).round() / f
}

/// The score at ascending rank `rank` (1-based) among the present scores,
/// and how many scores share that value.
pub fn rank_threshold<T: Scalar>(scores: &[Option<T>], rank: usize) -> Result<(T, usize)> {
    let mut sorted: Vec<T> = scores.iter().flatten().copied().collect();
    if rank == 0 || rank > sorted.len() {
        return Err(Error::Contract(format!(
            "threshold rank {rank} outside 1..={}",
            sorted.len()
        )));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let tau = sorted[rank - 1];
    let ties = sorted.iter().filter(|&&s| s == tau).count();
    Ok((tau, ties))
}

fn subtract_path<T: Scalar>(
    raw: &[Option<T>],
    data: &FairnessDataset<T>,
    coefficient: T,
) -> Vec<Option<T>> {
    raw.iter()
        .enumerate()
        .map(|(i, s)| s.map(|s| s - coefficient * T::from_count(data.a_of(i) as usize)))
        .collect()
}

/// Builds the policy from the training fit and training scores.
///
/// The threshold rank is the number of training negatives; each threshold is
/// the score at that ascending rank, so both are attained training scores.
/// With ties at that rank the shared value is used and strict-greater
/// classification applies. If the bias test is not significant the policy is
/// the identity: nothing is subtracted and both thresholds coincide.
pub fn derive_policy<T: Scalar>(
    fit: &PathModelFit<T>,
    verdict: &BiasVerdict<T>,
    train_scores: &ScoreSet<T>,
    train_data: &FairnessDataset<T>,
    opts: &PolicyOptions,
) -> Result<MitigationPolicy<T>> {
    train_data.check_fingerprint(train_scores.fingerprint())?;
    let rank = match opts.rank_basis {
        RankBasis::AllRows => train_data.raw_negative_count(),
        RankBasis::ValidRows => train_data.valid_negative_count(),
    };
    let (raw_threshold, raw_ties) = rank_threshold(train_scores.raw(), rank)?;

    let fitted = fit.beta_a_yhat();
    let bias_coefficient = if verdict.biased {
        opts.round_coefficient
            .map_or(fitted, |d| round_to(fitted, d))
    } else {
        T::zero()
    };
    let (mitigated_threshold, mitigated_ties) = if verdict.biased {
        let mitigated = subtract_path(train_scores.raw(), train_data, bias_coefficient);
        rank_threshold(&mitigated, rank)?
    } else {
        (raw_threshold, raw_ties)
    };

    Ok(MitigationPolicy {
        bias_coefficient,
        fitted_coefficient: fitted,
        round_coefficient: opts.round_coefficient,
        raw_threshold,
        mitigated_threshold,
        threshold_rank: rank,
        rank_basis: opts.rank_basis,
        raw_ties,
        mitigated_ties,
        verdict: verdict.clone(),
    })
}

/// Attaches mitigated scores `ŷ − bias_coefficient·a`; raw scores are untouched.
pub fn apply_mitigation<T: Scalar>(
    scores: &ScoreSet<T>,
    data: &FairnessDataset<T>,
    policy: &MitigationPolicy<T>,
) -> Result<ScoreSet<T>> {
    data.check_fingerprint(scores.fingerprint())?;
    if scores.len() != data.len() {
        return Err(Error::Contract(
            "scores and dataset differ in length".into(),
        ));
    }
    let mitigated = subtract_path(scores.raw(), data, policy.bias_coefficient);
    Ok(scores.clone().with_mitigated(mitigated))
}

/// Class 1 exactly when the score is strictly greater than `threshold`.
pub fn classify<T: Scalar>(
    scores: &ScoreSet<T>,
    variant: ScoreVariant,
    threshold: T,
) -> Result<ClassifiedScores<T>> {
    let values = scores
        .variant(variant)
        .ok_or_else(|| Error::Contract(format!("score set has no {} scores", variant.name())))?;
    let classes = values
        .iter()
        .map(|s| s.map(|s| u8::from(s > threshold)))
        .collect();
    Ok(ClassifiedScores {
        classes,
        threshold,
        variant,
        fingerprint: scores.fingerprint().to_string(),
    })
}
