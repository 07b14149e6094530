//! The recursive two-equation path model
//!
//! ```text
//! ŷ = β0_ŷ + β_{a,ŷ}·a + β_{y,ŷ}·y + e_ŷ
//! y = β0_y + β_{a,y}·a + e_y
//! ```
//!
//! With uncorrelated errors the system is recursive, so each equation is
//! estimated by ordinary least squares, which gives the maximum-likelihood
//! point estimates. Standard errors follow the maximum-likelihood convention
//! `SE² = diag((XᵀX)⁻¹)·RSS/n`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Smallest reported p-value; anything below is shown as `< 1e-300`.
pub const P_FLOOR: f64 = 1e-300;

/// Least-squares estimates with ML-convention standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub coefficients: Vec<T>,
    pub std_errors: Vec<T>,
    pub rss: T,
    pub n: usize,
    /// The response is reproduced exactly (up to rounding); SEs are zero.
    pub exact: bool,
}

impl<T: Scalar> OlsFit<T> {
    /// `RSS / n`.
    pub fn residual_variance(&self) -> T {
        self.rss / T::from_count(self.n)
    }
}

/// Ordinary least squares of `t` on the columns of `x`.
///
/// When the first column is all ones the remaining columns and the response
/// are centred before solving, so a response that does not depend on the
/// regressors yields slopes of exactly zero.
pub fn ols_with_se<T: Scalar>(x: &Matrix<T>, t: &[T]) -> Result<OlsFit<T>> {
    let n = x.rows();
    let k = x.cols();
    if t.len() != n {
        return Err(Error::Contract(format!(
            "{} responses for {n} rows",
            t.len()
        )));
    }
    if n <= k {
        return Err(Error::Degenerate {
            context: "path_model",
            message: format!("least squares needs more rows than columns ({n} <= {k})"),
        });
    }
    let has_intercept = k > 0 && x.column(0).all(|v| v == T::one());
    if has_intercept {
        centred_ols(x, t)
    } else {
        plain_ols(x, t)
    }
}

fn singular() -> Error {
    Error::Singular {
        context: "path_model",
    }
}

fn plain_ols<T: Scalar>(x: &Matrix<T>, t: &[T]) -> Result<OlsFit<T>> {
    let n = x.rows();
    let chol = Cholesky::factor(&x.gram()).map_err(|_| singular())?;
    let coefficients = chol.solve(&x.t_mul_vec(t));
    let fitted = x.mul_vec(&coefficients);
    let resid: Vec<T> = t.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let inv_diag = chol.inverse().diagonal();
    finish(coefficients, inv_diag, &resid, t, n)
}

fn centred_ols<T: Scalar>(x: &Matrix<T>, t: &[T]) -> Result<OlsFit<T>> {
    let n = x.rows();
    let k = x.cols();
    let nf = T::from_count(n);
    let means: Vec<T> = (1..k).map(|j| x.column(j).sum::<T>() / nf).collect();
    let t_mean = t.iter().copied().sum::<T>() / nf;

    let mut centred = Vec::with_capacity(n * (k - 1));
    for i in 0..n {
        let r = x.row(i);
        centred.extend((1..k).map(|j| r[j] - means[j - 1]));
    }
    let xc = Matrix::from_vec(n, k - 1, centred);
    let tc: Vec<T> = t.iter().map(|&v| v - t_mean).collect();

    let (slopes, slope_inv) = if k > 1 {
        let chol = Cholesky::factor(&xc.gram()).map_err(|_| singular())?;
        (chol.solve(&xc.t_mul_vec(&tc)), chol.inverse())
    } else {
        (Vec::new(), Matrix::zeros(0, 0))
    };
    let intercept = t_mean
        - slopes
            .iter()
            .zip(&means)
            .fold(T::zero(), |acc, (&b, &m)| acc + b * m);
    let fitted_c = xc.mul_vec(&slopes);
    let resid: Vec<T> = tc.iter().zip(&fitted_c).map(|(&a, &b)| a - b).collect();

    // diag((XᵀX)⁻¹): intercept entry is 1/n + mᵀ S⁻¹ m, slopes are diag(S⁻¹).
    let sm = slope_inv.mul_vec(&means);
    let intercept_var = T::one() / nf
        + means
            .iter()
            .zip(&sm)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    let mut inv_diag = vec![intercept_var];
    inv_diag.extend(slope_inv.diagonal());

    let mut coefficients = vec![intercept];
    coefficients.extend(slopes);
    finish(coefficients, inv_diag, &resid, t, n)
}

fn finish<T: Scalar>(
    coefficients: Vec<T>,
    inv_diag: Vec<T>,
    resid: &[T],
    t: &[T],
    n: usize,
) -> Result<OlsFit<T>> {
    let mut rss: T = resid.iter().map(|&r| r * r).sum();
    // Residuals at rounding level mean the response is an exact linear
    // function of the regressors.
    let scale = t.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tiny = T::epsilon() * scale * T::of(64.0);
    let exact = resid.iter().all(|r| r.abs() <= tiny);
    if exact {
        rss = T::zero();
    }
    let sigma2 = rss / T::from_count(n);
    let std_errors = inv_diag
        .into_iter()
        .map(|d| (d.max(T::zero()) * sigma2).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients,
        std_errors,
        rss,
        n,
        exact,
    })
}

/// Two-sided p-value of a standard-normal statistic, floored at [`P_FLOOR`].
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(P_FLOOR, 1.0)
}

/// One estimated coefficient with its Wald test.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient<T> {
    pub name: &'static str,
    pub estimate: T,
    pub std_error: T,
    /// `estimate / std_error`; absent when the standard error is zero.
    pub z: Option<T>,
    /// Two-sided normal p-value. For an exact fit (zero SE) this is 0 when
    /// the estimate is distinguishable from zero and 1 otherwise.
    pub p: f64,
}

impl<T: Scalar> Coefficient<T> {
    fn new(name: &'static str, estimate: T, std_error: T, scale: T) -> Self {
        if std_error > T::zero() {
            let z = estimate / std_error;
            Self {
                name,
                estimate,
                std_error,
                z: Some(z),
                p: two_sided_p(z.as_f64()),
            }
        } else {
            let nonzero = estimate.abs() > T::epsilon().sqrt() * scale;
            Self {
                name,
                estimate,
                std_error,
                z: None,
                p: if nonzero { 0.0 } else { 1.0 },
            }
        }
    }
}

/// Estimates for both equations of the path model.
#[derive(Debug, Clone, PartialEq)]
pub struct PathModelFit<T> {
    /// `[intercept, a, y]` for the score equation.
    pub score_equation: [Coefficient<T>; 3],
    /// `[intercept, a]` for the target equation.
    pub target_equation: [Coefficient<T>; 2],
    pub var_e_yhat: T,
    pub var_e_y: T,
    pub n_used: usize,
}

impl<T: Scalar> PathModelFit<T> {
    pub fn beta_0_yhat(&self) -> T {
        self.score_equation[0].estimate
    }

    /// Direct effect of the protected attribute on the score: the bias path.
    pub fn beta_a_yhat(&self) -> T {
        self.score_equation[1].estimate
    }

    pub fn beta_y_yhat(&self) -> T {
        self.score_equation[2].estimate
    }

    pub fn beta_0_y(&self) -> T {
        self.target_equation[0].estimate
    }

    pub fn beta_a_y(&self) -> T {
        self.target_equation[1].estimate
    }

    pub fn bias_coefficient(&self) -> &Coefficient<T> {
        &self.score_equation[1]
    }
}

/// Fits both equations on the rows where `a`, `y` and `yhat` are all present.
pub fn fit_path_model<T: Scalar>(
    a: &[Option<u8>],
    y: &[Option<u8>],
    yhat: &[Option<T>],
) -> Result<PathModelFit<T>> {
    if a.len() != y.len() || a.len() != yhat.len() {
        return Err(Error::Contract(format!(
            "path model inputs differ in length ({}, {}, {})",
            a.len(),
            y.len(),
            yhat.len()
        )));
    }
    let mut design = Vec::new();
    let mut scores = Vec::new();
    let mut targets = Vec::new();
    for i in 0..a.len() {
        if let (Some(ai), Some(yi), Some(si)) = (a[i], y[i], yhat[i]) {
            let (ai, yi) = (T::from_count(ai as usize), T::from_count(yi as usize));
            design.extend_from_slice(&[T::one(), ai, yi]);
            scores.push(si);
            targets.push(yi);
        }
    }
    let n = scores.len();
    if n < 3 {
        return Err(Error::Degenerate {
            context: "path_model",
            message: format!("only {n} complete rows; need at least 3"),
        });
    }
    let x = Matrix::from_vec(n, 3, design);
    let constant = |j: usize| {
        let first = x[(0, j)];
        x.column(j).all(|v| v == first)
    };
    if constant(1) {
        return Err(Error::Degenerate {
            context: "path_model",
            message: "protected attribute is constant; no identifiable path".into(),
        });
    }
    if constant(2) {
        return Err(Error::Degenerate {
            context: "path_model",
            message: "target is constant; no identifiable path".into(),
        });
    }

    let score_fit = ols_with_se(&x, &scores)?;
    let target_x = Matrix::from_vec(n, 2, (0..n).flat_map(|i| [T::one(), x[(i, 1)]]).collect());
    let target_fit = ols_with_se(&target_x, &targets)?;

    let s_scale = scores.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let c = |fit: &OlsFit<T>, j: usize, name: &'static str, scale: T| {
        Coefficient::new(name, fit.coefficients[j], fit.std_errors[j], scale)
    };
    Ok(PathModelFit {
        score_equation: [
            c(&score_fit, 0, "intercept", s_scale),
            c(&score_fit, 1, "a", s_scale),
            c(&score_fit, 2, "y", s_scale),
        ],
        target_equation: [
            c(&target_fit, 0, "intercept", T::one()),
            c(&target_fit, 1, "a", T::one()),
        ],
        var_e_yhat: score_fit.residual_variance(),
        var_e_y: target_fit.residual_variance(),
        n_used: n,
    })
}

/// Significance verdict on the direct protected-attribute path.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVerdict<T> {
    pub biased: bool,
    pub alpha: f64,
    pub coefficient: &'static str,
    pub estimate: T,
    pub z: Option<T>,
    pub p: f64,
}

/// `biased` is true exactly when the two-sided p-value of `β_{a,ŷ}` is below `alpha`.
pub fn test_bias<T: Scalar>(fit: &PathModelFit<T>, alpha: f64) -> BiasVerdict<T> {
    let c = fit.bias_coefficient();
    BiasVerdict {
        biased: c.p < alpha,
        alpha,
        coefficient: "a -> yhat",
        estimate: c.estimate,
        z: c.z,
        p: c.p,
    }
}
