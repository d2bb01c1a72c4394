use super::*;
use crate::frame::Frame;

fn frame(cols: &[(&str, Vec<f64>)]) -> Frame {
    let mut f = Frame::new();
    for (n, v) in cols {
        f.push_num(n, v.clone()).unwrap();
    }
    f
}

#[test]
fn balanced_intercept_only_logit_is_zero() {
    let f = frame(&[("y", vec![0.0, 1.0, 0.0, 1.0])]);
    let r = fit(&f, &RegressionSpec::new(Family::Logistic, "y"), &FitOptions::default()).unwrap();
    assert!(r.estimate(INTERCEPT).unwrap().abs() < 1e-10);
    assert!(r.pseudo_r2.unwrap().abs() < 1e-12);
}

#[test]
fn saturated_binary_logit_slope() {
    // p0 = 1/4, p1 = 3/4
    let x = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let y = vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
    let f = frame(&[("y", y), ("x", x)]);
    let spec = RegressionSpec::new(Family::Logistic, "y").covariates(["x"]);
    let r = fit(&f, &spec, &FitOptions::default()).unwrap();
    assert!((r.estimate("x").unwrap() - 2.0 * 3f64.ln()).abs() < 1e-8);
    let ame = average_marginal_effects(&r, &f, "x", AmeKind::Binary01).unwrap();
    assert!((ame.effect - 0.5).abs() < 1e-8);
    assert!((ame.percentage_points.unwrap() - 50.0).abs() < 1e-6);
}

#[test]
fn exact_line_has_unit_r_squared() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let f = frame(&[("y", y), ("x", x)]);
    let spec = RegressionSpec::new(Family::Gaussian, "y").covariates(["x"]);
    let r = fit(&f, &spec, &FitOptions::default()).unwrap();
    assert!((r.estimate("x").unwrap() - 2.0).abs() < 1e-10);
    assert!((r.r_squared.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.log_likelihood, None);
}

#[test]
fn constant_response_has_zero_r_squared() {
    let f = frame(&[("y", vec![3.0; 6]), ("x", vec![1.0, 2.0, 4.0, 3.0, 0.0, 5.0])]);
    let spec = RegressionSpec::new(Family::Gaussian, "y").covariates(["x"]);
    let r = fit(&f, &spec, &FitOptions::default()).unwrap();
    assert_eq!(r.r_squared, Some(0.0));
}

#[test]
fn aliased_covariate_reports_none() {
    let x = vec![0.3, 1.0, 2.2, 3.1, 4.0, 5.5];
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let y = vec![0.1, 1.3, 2.0, 3.3, 3.9, 5.6];
    let f = frame(&[("y", y), ("x", x), ("x2", x2)]);
    let spec = RegressionSpec::new(Family::Gaussian, "y").covariates(["x", "x2"]);
    let r = fit(&f, &spec, &FitOptions::default()).unwrap();
    assert!(r.estimate("x").is_some());
    assert_eq!(r.estimate("x2"), None);
    assert_eq!(r.vcov_terms.len(), 2);
}

#[test]
fn only_aliased_covariates_is_rank_deficient() {
    let f = frame(&[("y", vec![0.0, 1.0, 2.0, 1.0]), ("c", vec![1.0; 4])]);
    let spec = RegressionSpec::new(Family::Gaussian, "y").covariates(["c"]);
    assert!(matches!(
        fit(&f, &spec, &FitOptions::default()),
        Err(EconometricsError::RankDeficient)
    ));
}

#[test]
fn stars_thresholds() {
    assert_eq!(stars(Some(0.005)), "***");
    assert_eq!(stars(Some(0.03)), "**");
    assert_eq!(stars(Some(0.07)), "*");
    assert_eq!(stars(Some(0.2)), "");
    assert_eq!(stars(None), "");
}

#[test]
fn fit_result_round_trips_through_json() {
    let f = frame(&[("y", vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]), ("x", vec![0.1, 0.4, 0.9, 0.2, 0.3, 0.5])]);
    let spec = RegressionSpec::new(Family::Logistic, "y").covariates(["x"]);
    let r = fit(&f, &spec, &FitOptions::default()).unwrap();
    let back: FitResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back.coefficients, r.coefficients);
    let a = average_marginal_effects(&r, &f, "x", AmeKind::Unit).unwrap();
    let b = average_marginal_effects(&back, &f, "x", AmeKind::Unit).unwrap();
    assert!((a.effect - b.effect).abs() < 1e-15);
}
