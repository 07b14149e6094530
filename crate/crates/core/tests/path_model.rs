use fairpath_core::path_model::two_sided_p;
use fairpath_core::{fit_path_model, generate, ols_with_se, test_bias, Matrix, SynthSpec};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Closed-form simple regression: explicit 2x2 inverse of XᵀX.
#[test]
fn simple_regression_matches_explicit_inverse() {
    let xs = [1.0, 2.0, 4.0, 5.0, 7.5];
    let ts = [2.1, 3.9, 8.2, 9.8, 15.3];
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let st: f64 = ts.iter().sum();
    let sxt: f64 = xs.iter().zip(&ts).map(|(x, t)| x * t).sum();
    let det = n * sxx - sx * sx;
    let inv = [[sxx / det, -sx / det], [-sx / det, n / det]];
    let b0 = inv[0][0] * st + inv[0][1] * sxt;
    let b1 = inv[1][0] * st + inv[1][1] * sxt;
    let rss: f64 = xs
        .iter()
        .zip(&ts)
        .map(|(x, t)| (t - b0 - b1 * x).powi(2))
        .sum();
    let s2 = rss / n;

    let x = Matrix::from_rows(&xs.iter().map(|&v| [1.0, v]).collect::<Vec<_>>());
    let fit = ols_with_se(&x, &ts).unwrap();
    assert!(close(fit.coefficients[0], b0, 1e-10));
    assert!(close(fit.coefficients[1], b1, 1e-10));
    assert!(close(fit.rss, rss, 1e-10));
    assert!(close(fit.std_errors[0], (inv[0][0] * s2).sqrt(), 1e-10));
    assert!(close(fit.std_errors[1], (inv[1][1] * s2).sqrt(), 1e-10));
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Three-regressor normal equations solved by Cramer's rule.
fn cramer_ols(rows: &[[f64; 3]], t: &[f64]) -> [f64; 3] {
    let mut g = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (x, &ti) in rows.iter().zip(t) {
        for j in 0..3 {
            r[j] += x[j] * ti;
            for k in 0..3 {
                g[j][k] += x[j] * x[k];
            }
        }
    }
    let d = det3(g);
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut m = g;
        for k in 0..3 {
            m[k][j] = r[k];
        }
        *o = det3(m) / d;
    }
    out
}

#[test]
fn three_regressor_fit_matches_cramer() {
    let problems: [(Vec<[f64; 3]>, Vec<f64>); 3] = [
        (
            vec![
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [1.0, 0.0, 1.0],
                [1.0, 1.0, 1.0],
                [1.0, 1.0, 1.0],
                [1.0, 0.0, 0.0],
            ],
            vec![0.1, 0.35, 0.6, 0.9, 0.8, 0.05],
        ),
        (
            vec![
                [1.0, 2.0, -1.0],
                [1.0, 0.5, 3.0],
                [1.0, -1.5, 0.2],
                [1.0, 3.3, 1.1],
                [1.0, 0.0, -2.0],
            ],
            vec![1.0, -2.5, 0.7, 4.4, 3.1],
        ),
        // No intercept column: exercises the uncentred path.
        (
            vec![
                [2.0, 1.0, 0.0],
                [0.5, 1.0, 1.0],
                [1.0, 0.0, 1.0],
                [3.0, 2.0, 1.0],
                [0.1, 0.2, 0.3],
            ],
            vec![3.0, 1.5, 1.0, 6.1, 0.4],
        ),
    ];
    for (rows, t) in &problems {
        let oracle = cramer_ols(rows, t);
        let fit = ols_with_se(&Matrix::from_rows(rows), t).unwrap();
        for (a, b) in fit.coefficients.iter().zip(oracle) {
            assert!(
                (a - b).abs() < 1e-10,
                "{:?} vs {oracle:?}",
                fit.coefficients
            );
        }
    }
}

#[test]
fn duplicated_rows_keep_coefficients_and_double_rss() {
    let rows = [
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 0.0],
    ];
    let t = [0.2, 0.5, 0.4, 1.1, 0.45];
    let once = ols_with_se(&Matrix::from_rows(&rows), &t).unwrap();
    let rows2: Vec<_> = rows.iter().chain(&rows).copied().collect();
    let t2: Vec<_> = t.iter().chain(&t).copied().collect();
    let twice = ols_with_se(&Matrix::from_rows(&rows2), &t2).unwrap();
    for (a, b) in once.coefficients.iter().zip(&twice.coefficients) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(close(twice.rss, 2.0 * once.rss, 1e-12));
}

#[test]
fn exact_line_is_recovered() {
    let xs = [-1.0, 0.0, 0.5, 2.0, 3.0];
    let t: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
    let fit = ols_with_se(
        &Matrix::from_rows(&xs.iter().map(|&v| [1.0, v]).collect::<Vec<_>>()),
        &t,
    )
    .unwrap();
    assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
    assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    assert_eq!(fit.rss, 0.0);
}

#[test]
fn perfect_mediation() {
    let a = [0, 0, 1, 1, 0, 1, 1, 0];
    let y = [0, 1, 0, 1, 1, 1, 0, 0];
    let yhat: Vec<Option<f64>> = y.iter().map(|&v| Some(v as f64)).collect();
    let opt = |v: &[u8]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
    let fit = fit_path_model(&opt(&a), &opt(&y), &yhat).unwrap();
    assert!((fit.beta_y_yhat() - 1.0).abs() < 1e-12);
    assert!(fit.beta_a_yhat().abs() < 1e-12);
    assert!(fit.beta_0_yhat().abs() < 1e-12);
    assert_eq!(fit.var_e_yhat, 0.0);
    assert!(!test_bias(&fit, 0.05).biased);
}

#[test]
fn target_equation_is_the_group_mean_difference() {
    let spec = SynthSpec {
        n: 500,
        ..SynthSpec::default()
    };
    let (data, scores) = generate::<f64>(&spec).unwrap();
    let fit = fit_path_model(data.a(), data.y(), scores.raw()).unwrap();
    let mean = |g: u8| {
        let ys: Vec<f64> = (0..data.len())
            .filter(|&i| data.a_of(i) == g)
            .map(|i| data.y_of(i) as f64)
            .collect();
        ys.iter().sum::<f64>() / ys.len() as f64
    };
    assert!((fit.beta_0_y() - mean(0)).abs() < 1e-12);
    assert!((fit.beta_a_y() - (mean(1) - mean(0))).abs() < 1e-12);
}

#[test]
fn synthetic_recovery_within_three_se() {
    let (data, scores) = generate::<f64>(&SynthSpec::default()).unwrap();
    let fit = fit_path_model(data.a(), data.y(), scores.raw()).unwrap();
    let truth = [0.1, 0.2, 0.5];
    // Independent closed-form solve on the same draw.
    let rows: Vec<[f64; 3]> = (0..data.len())
        .map(|i| [1.0, data.a_of(i) as f64, data.y_of(i) as f64])
        .collect();
    let t: Vec<f64> = scores.raw().iter().map(|s| s.unwrap()).collect();
    let oracle = cramer_ols(&rows, &t);
    for ((c, &b), o) in fit.score_equation.iter().zip(&truth).zip(oracle) {
        assert!(
            (c.estimate - b).abs() < 3.0 * c.std_error,
            "{} = {} ± {}",
            c.name,
            c.estimate,
            c.std_error
        );
        assert!((c.estimate - o).abs() < 1e-10);
    }
}

#[test]
fn zero_effect_gives_unit_p() {
    // a carries no information about yhat beyond y: identical cells per group.
    let a = [0, 0, 0, 0, 1, 1, 1, 1];
    let y = [0, 0, 1, 1, 0, 0, 1, 1];
    let s = [0.1, 0.3, 0.6, 0.8, 0.1, 0.3, 0.6, 0.8];
    let opt = |v: &[u8]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
    let yhat: Vec<Option<f64>> = s.iter().map(|&v| Some(v)).collect();
    let fit = fit_path_model(&opt(&a), &opt(&y), &yhat).unwrap();
    let c = fit.bias_coefficient();
    assert!(c.std_error > 0.0);
    assert!(c.estimate.abs() < 1e-15);
    assert!(c.z.unwrap().abs() < 1e-12);
    assert!(c.p > 1.0 - 1e-12);
    assert!(!test_bias(&fit, 0.05).biased);
}

#[test]
fn p_values_match_normal_quantiles() {
    assert!((two_sided_p(1.959963984540054) - 0.05).abs() < 1e-10);
    assert!((two_sided_p(-2.5758293035489004) - 0.01).abs() < 1e-10);
    assert_eq!(two_sided_p(0.0), 1.0);
    assert_eq!(two_sided_p(100.0), 1e-300);
}

fn labelled() -> impl Strategy<Value = Vec<(u8, u8, f64)>> {
    prop::collection::vec((0u8..2, 0u8..2, -1.0f64..2.0), 12..80).prop_filter(
        "both groups and classes",
        |rows| {
            (0..2).all(|g| rows.iter().filter(|r| r.0 == g).count() >= 2)
                && (0..2).all(|g| rows.iter().filter(|r| r.1 == g).count() >= 2)
                && rows.iter().any(|r| r.0 != r.1)
        },
    )
}

fn fit_rows(rows: &[(u8, u8, f64)]) -> fairpath_core::PathFit {
    let a: Vec<_> = rows.iter().map(|r| Some(r.0)).collect();
    let y: Vec<_> = rows.iter().map(|r| Some(r.1)).collect();
    let s: Vec<_> = rows.iter().map(|r| Some(r.2)).collect();
    fit_path_model(&a, &y, &s).unwrap()
}

proptest! {
    #[test]
    fn affine_rescaling_of_scores(rows in labelled(), c in 0.1f64..5.0, d in -3.0f64..3.0) {
        let base = fit_rows(&rows);
        let moved: Vec<_> = rows.iter().map(|r| (r.0, r.1, c * r.2 + d)).collect();
        let fit = fit_rows(&moved);
        prop_assert!(close(fit.beta_0_yhat(), c * base.beta_0_yhat() + d, 1e-9));
        prop_assert!(close(fit.beta_a_yhat(), c * base.beta_a_yhat(), 1e-9));
        prop_assert!(close(fit.beta_y_yhat(), c * base.beta_y_yhat(), 1e-9));
        if let (Some(z0), Some(z1)) = (base.bias_coefficient().z, fit.bias_coefficient().z) {
            prop_assert!(close(z0, z1, 1e-6));
        }
    }

    #[test]
    fn flipping_the_group_coding_negates_the_bias_path(rows in labelled()) {
        let base = fit_rows(&rows);
        let flipped: Vec<_> = rows.iter().map(|r| (1 - r.0, r.1, r.2)).collect();
        let fit = fit_rows(&flipped);
        prop_assert!(close(fit.beta_a_yhat(), -base.beta_a_yhat(), 1e-9));
        prop_assert!(close(fit.beta_0_yhat(), base.beta_0_yhat() + base.beta_a_yhat(), 1e-9));
        prop_assert!(close(fit.bias_coefficient().std_error, base.bias_coefficient().std_error, 1e-9));
        prop_assert!((fit.bias_coefficient().p - base.bias_coefficient().p).abs() < 1e-9);
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors(rows in labelled()) {
        let fit = fit_rows(&rows);
        let mut sums = [0.0f64; 3];
        let mut scale = 0.0f64;
        for r in &rows {
            let e = r.2 - fit.beta_0_yhat() - fit.beta_a_yhat() * r.0 as f64 - fit.beta_y_yhat() * r.1 as f64;
            sums[0] += e;
            sums[1] += e * r.0 as f64;
            sums[2] += e * r.1 as f64;
            scale += r.2.abs();
        }
        for s in sums {
            prop_assert!(s.abs() < 1e-10 * (1.0 + scale));
        }
        // ML variance is the mean squared residual.
        let rss: f64 = rows.iter().map(|r| {
            let e = r.2 - fit.beta_0_yhat() - fit.beta_a_yhat() * r.0 as f64 - fit.beta_y_yhat() * r.1 as f64;
            e * e
        }).sum();
        prop_assert!(close(fit.var_e_yhat, rss / rows.len() as f64, 1e-8));
    }
}
