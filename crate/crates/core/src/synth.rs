//! Synthetic data drawn from the path model with known coefficients.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. Each row consumes exactly three 64-bit draws in the order
//! `a`, `y`, noise; a draw `u` becomes a uniform on the open interval (0, 1) as
//! `((u >> 11) + 0.5) / 2^53`. Bernoulli variates are `uniform < p` and normal
//! variates use the inverse normal CDF. Calibration trial `i` uses seed
//! `seed + i`.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{FairnessDataset, Provenance};
use crate::error::{Error, Result};
use crate::path_model::{fit_path_model, test_bias};
use crate::scalar::{sigmoid, Scalar};
use crate::scores::ScoreSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    /// `Pr{a = 1}`.
    pub p_a: f64,
    /// Logit-scale intercept of the target.
    pub beta_0_y: f64,
    /// Logit-scale effect of `a` on the target.
    pub beta_a_y: f64,
    pub beta_0_yhat: f64,
    pub beta_a_yhat: f64,
    pub beta_y_yhat: f64,
    /// Standard deviation of the score noise `e_ŷ`.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 200,
            p_a: 0.5,
            beta_0_y: -0.5,
            beta_a_y: 0.8,
            beta_0_yhat: 0.1,
            beta_a_yhat: 0.2,
            beta_y_yhat: 0.5,
            noise_sd: 0.01,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_a > 0.0 && self.p_a < 1.0) {
            return Err(Error::Config(format!(
                "p_a must lie in (0, 1), got {}",
                self.p_a
            )));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::Config(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let coefs = [
            self.beta_0_y,
            self.beta_a_y,
            self.beta_0_yhat,
            self.beta_a_yhat,
            self.beta_y_yhat,
        ];
        if coefs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Same spec under a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws a dataset (no features, all rows valid) and its scores.
pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<(FairnessDataset<T>, ScoreSet<T>)> {
    spec.validate()?;
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut a = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let mut scores = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let ua = open_uniform(&mut rng);
        let uy = open_uniform(&mut rng);
        let ue = open_uniform(&mut rng);
        let ai = u8::from(ua < spec.p_a);
        let p_y = sigmoid(spec.beta_0_y + spec.beta_a_y * ai as f64);
        let yi = u8::from(uy < p_y);
        let noise = spec.noise_sd * std_normal.inverse_cdf(ue);
        let s =
            spec.beta_0_yhat + spec.beta_a_yhat * ai as f64 + spec.beta_y_yhat * yi as f64 + noise;
        a.push(ai);
        y.push(yi);
        scores.push(Some(T::of(s)));
    }
    let data = FairnessDataset::from_labels(
        a,
        y,
        Provenance {
            source: format!("synthetic(seed={})", spec.seed),
            fingerprint: "synthetic:a,y".into(),
        },
    )?;
    let scores = ScoreSet::new(scores, &data)?;
    Ok((data, scores))
}

/// Writes a generated dataset in the ingestion CSV format (`a,y` header).
pub fn to_ingest_csv<T: Scalar>(data: &FairnessDataset<T>) -> String {
    let mut out = String::from("a,y\n");
    for i in 0..data.len() {
        let show = |v: Option<u8>| v.map_or("?".to_string(), |v| v.to_string());
        let _ = writeln!(out, "{},{}", show(data.a()[i]), show(data.y()[i]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub trials: usize,
    pub rejections: usize,
    pub alpha: f64,
}

impl CalibrationResult {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.trials as f64
    }
}

/// Fraction of trials in which the bias test rejects at level `alpha`.
///
/// Trial `i` draws from `spec` with seed `spec.seed + i`. Pass a spec with
/// `beta_a_yhat = 0` to measure the size of the test, or a nonzero effect to
/// measure power.
pub fn calibration_trial(spec: &SynthSpec, trials: usize, alpha: f64) -> Result<CalibrationResult> {
    if trials < 100 {
        return Err(Error::Config(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut rejections = 0;
    for i in 0..trials {
        let trial = spec.with_seed(spec.seed.wrapping_add(i as u64));
        let (data, scores) = generate::<f64>(&trial)?;
        let fit = fit_path_model(data.a(), data.y(), scores.raw())?;
        if test_bias(&fit, alpha).biased {
            rejections += 1;
        }
    }
    Ok(CalibrationResult {
        trials,
        rejections,
        alpha,
    })
}
