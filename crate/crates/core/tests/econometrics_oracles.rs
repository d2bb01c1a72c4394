//! Model fits checked against direct dense computations.

use agglomer::econometrics::{
    average_marginal_effects, counterfactual_count_ame, fit, sigmoid, AmeKind, CountDelta, CovariateSpec, Family,
    FitOptions, RegressionSpec, ThetaMode, INTERCEPT,
};
use agglomer::frame::Frame;
use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};

const GROUPS: [&str; 5] = ["g0", "g1", "g2", "g3", "g4"];

struct Data {
    x: Vec<f64>,
    z: Vec<f64>,
    group: Vec<usize>,
}

fn data(n: usize, seed: u64) -> Data {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    Data {
        x: (0..n).map(|_| unit.sample(&mut rng)).collect(),
        z: (0..n).map(|_| unit.sample(&mut rng)).collect(),
        group: (0..n).map(|r| r % GROUPS.len()).collect(),
    }
}

fn frame(d: &Data, y: Vec<f64>) -> Frame {
    let mut f = Frame::new();
    f.push_num("y", y).unwrap();
    f.push_num("x", d.x.clone()).unwrap();
    f.push_num("z", d.z.clone()).unwrap();
    f.push_text("g", d.group.iter().map(|&g| GROUPS[g].to_string()).collect()).unwrap();
    f
}

/// Intercept, x, z and one dummy per non-first group.
fn dummy_design(d: &Data) -> DMatrix<f64> {
    let n = d.x.len();
    DMatrix::from_fn(n, 3 + GROUPS.len() - 1, |r, j| match j {
        0 => 1.0,
        1 => d.x[r],
        2 => d.z[r],
        _ => f64::from(u8::from(d.group[r] == j - 2)),
    })
}

/// Newton-Raphson on a canonical-link log likelihood.
fn newton(x: &DMatrix<f64>, y: &[f64], mean: impl Fn(f64) -> (f64, f64)) -> DVector<f64> {
    let mut beta = DVector::zeros(x.ncols());
    for _ in 0..100 {
        let eta = x * &beta;
        let mut score = DVector::zeros(x.ncols());
        let mut info = DMatrix::zeros(x.ncols(), x.ncols());
        for r in 0..x.nrows() {
            let (mu, w) = mean(eta[r]);
            let row = x.row(r).transpose();
            score += &row * (y[r] - mu);
            info += &row * row.transpose() * w;
        }
        let step = info.lu().solve(&score).expect("nonsingular information");
        beta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    beta
}

#[test]
fn gaussian_with_absorbed_effects_matches_dummy_least_squares() {
    let d = data(400, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let y: Vec<f64> = (0..400)
        .map(|r| 1.0 + 2.0 * d.x[r] - 0.7 * d.z[r] + 0.3 * d.group[r] as f64 + noise.sample(&mut rng))
        .collect();
    let spec = RegressionSpec::new(Family::Gaussian, "y")
        .covariates(["x", "z"])
        .fixed_effect(&["g"]);
    let f = fit(&frame(&d, y.clone()), &spec, &FitOptions::default()).unwrap();

    let x = dummy_design(&d);
    let beta = (x.transpose() * &x)
        .cholesky()
        .unwrap()
        .solve(&(x.transpose() * DVector::from_vec(y)));
    assert_relative_eq!(f.estimate("x").unwrap(), beta[1], max_relative = 1e-10);
    assert_relative_eq!(f.estimate("z").unwrap(), beta[2], max_relative = 1e-10);
    for (r, &fitted) in f.fitted.iter().enumerate() {
        let direct: f64 = x.row(f.rows[r]).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(fitted, direct, epsilon = 1e-9);
    }
}

#[test]
fn logistic_with_absorbed_effects_matches_dummy_newton() {
    let d = data(2000, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let y: Vec<f64> = (0..2000)
        .map(|r| {
            let eta = -0.5 + 0.8 * d.x[r] + 0.4 * d.z[r] + 0.25 * d.group[r] as f64;
            f64::from(u8::from(rng.gen_bool(sigmoid(eta))))
        })
        .collect();
    let spec = RegressionSpec::new(Family::Logistic, "y")
        .covariates(["x", "z"])
        .fixed_effect(&["g"]);
    let f = fit(&frame(&d, y.clone()), &spec, &FitOptions::default()).unwrap();
    assert_eq!(f.n_dropped_separation, 0);

    let x = dummy_design(&d);
    let beta = newton(&x, &y, |e| {
        let p = sigmoid(e);
        (p, p * (1.0 - p))
    });
    assert_relative_eq!(f.estimate("x").unwrap(), beta[1], max_relative = 1e-8);
    assert_relative_eq!(f.estimate("z").unwrap(), beta[2], max_relative = 1e-8);
    let eta = &x * &beta;
    for (r, &fitted) in f.fitted.iter().enumerate() {
        assert_relative_eq!(fitted, sigmoid(eta[f.rows[r]]), epsilon = 1e-9);
    }
}

#[test]
fn poisson_limit_matches_poisson_newton() {
    let d = data(1500, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let y: Vec<f64> = (0..1500)
        .map(|r| Poisson::new((0.4 + 0.3 * d.x[r] - 0.2 * d.z[r]).exp()).unwrap().sample(&mut rng))
        .collect();
    let spec = RegressionSpec::new(Family::Negbin, "y").covariates(["x", "z"]);
    let f = fit(&frame(&d, y.clone()), &spec, &FitOptions { theta: ThetaMode::Infinite }).unwrap();
    assert!(f.dispersion.as_ref().unwrap().poisson_limit);

    let x = DMatrix::from_fn(1500, 3, |r, j| [1.0, d.x[r], d.z[r]][j]);
    let beta = newton(&x, &y, |e| (e.exp(), e.exp()));
    assert_relative_eq!(f.estimate(INTERCEPT).unwrap(), beta[0], max_relative = 1e-8);
    assert_relative_eq!(f.estimate("x").unwrap(), beta[1], max_relative = 1e-8);
    assert_relative_eq!(f.estimate("z").unwrap(), beta[2], max_relative = 1e-8);

    // with the dispersion free, equidispersed data either hits the limit or
    // lands on a large theta with nearly the same slopes
    let free = fit(&frame(&d, y), &spec, &FitOptions::default()).unwrap();
    let disp = free.dispersion.as_ref().unwrap();
    assert!(disp.poisson_limit || disp.theta.unwrap() > 20.0, "{disp:?}");
    assert_relative_eq!(free.estimate("x").unwrap(), beta[1], max_relative = 1e-2);
}

#[test]
fn shifting_a_covariate_only_moves_the_intercept() {
    let d = data(800, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let y: Vec<f64> = (0..800)
        .map(|r| f64::from(u8::from(rng.gen_bool(sigmoid(0.3 - 0.6 * d.x[r] + 0.5 * d.z[r])))))
        .collect();
    let spec = RegressionSpec::new(Family::Logistic, "y").covariates(["x", "z"]);
    let base = fit(&frame(&d, y.clone()), &spec, &FitOptions::default()).unwrap();
    let shifted_data = Data {
        x: d.x.iter().map(|v| v + 5.0).collect(),
        z: d.z.clone(),
        group: d.group.clone(),
    };
    let shifted = fit(&frame(&shifted_data, y), &spec, &FitOptions::default()).unwrap();
    let bx = base.estimate("x").unwrap();
    assert_relative_eq!(shifted.estimate("x").unwrap(), bx, max_relative = 1e-8);
    assert_relative_eq!(shifted.estimate("z").unwrap(), base.estimate("z").unwrap(), max_relative = 1e-8);
    assert_relative_eq!(
        shifted.estimate(INTERCEPT).unwrap(),
        base.estimate(INTERCEPT).unwrap() - 5.0 * bx,
        max_relative = 1e-8
    );
    assert_relative_eq!(shifted.log_likelihood.unwrap(), base.log_likelihood.unwrap(), max_relative = 1e-10);
}

#[test]
fn marginal_effects_equal_direct_reprediction() {
    let d = data(1200, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let binary: Vec<f64> = d.x.iter().map(|&v| f64::from(u8::from(v > 0.2))).collect();
    let y: Vec<f64> = (0..1200)
        .map(|r| {
            let eta = -0.4 + 0.7 * binary[r] + 0.3 * d.z[r] - 0.2 * binary[r] * d.z[r];
            f64::from(u8::from(rng.gen_bool(sigmoid(eta))))
        })
        .collect();
    let mut f = frame(&d, y);
    f.set_num("x", binary.clone()).unwrap();
    let spec = RegressionSpec::new(Family::Logistic, "y")
        .covariates(["x", "z"])
        .interaction("x", "z");
    let result = fit(&f, &spec, &FitOptions::default()).unwrap();
    let b = |name: &str| result.estimate(name).unwrap();
    let (b0, bx, bz, bxz) = (b(INTERCEPT), b("x"), b("z"), b("x:z"));
    let eta = |x: f64, z: f64| b0 + bx * x + bz * z + bxz * x * z;

    let binary01 = average_marginal_effects(&result, &f, "x", AmeKind::Binary01).unwrap();
    let direct = d.z.iter().map(|&z| sigmoid(eta(1.0, z)) - sigmoid(eta(0.0, z))).sum::<f64>() / 1200.0;
    assert_relative_eq!(binary01.effect, direct, max_relative = 1e-10);
    assert_relative_eq!(binary01.percentage_points.unwrap(), 100.0 * direct, max_relative = 1e-10);

    let unit = average_marginal_effects(&result, &f, "z", AmeKind::Unit).unwrap();
    let direct = (0..1200)
        .map(|r| sigmoid(eta(binary[r], d.z[r] + 1.0)) - sigmoid(eta(binary[r], d.z[r])))
        .sum::<f64>()
        / 1200.0;
    assert_relative_eq!(unit.effect, direct, max_relative = 1e-10);

    let sd = average_marginal_effects(&result, &f, "z", AmeKind::SdIncrease).unwrap();
    let mean = d.z.iter().sum::<f64>() / 1200.0;
    let step = (d.z.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / 1199.0).sqrt();
    assert_relative_eq!(sd.step.unwrap(), step, max_relative = 1e-12);
    let direct = (0..1200)
        .map(|r| sigmoid(eta(binary[r], d.z[r] + step)) - sigmoid(eta(binary[r], d.z[r])))
        .sum::<f64>()
        / 1200.0;
    assert_relative_eq!(sd.effect, direct, max_relative = 1e-10);
}

#[test]
fn count_effect_reevaluates_the_transformed_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 1000;
    let counts: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0u32..40))).collect();
    let y: Vec<f64> = counts
        .iter()
        .map(|&c| Poisson::new((0.2 + 0.25 * c.asinh()).exp()).unwrap().sample(&mut rng))
        .collect();
    let mut f = Frame::new();
    f.push_num("y", y).unwrap();
    f.push_num("n", counts.clone()).unwrap();
    let spec = RegressionSpec::new(Family::Negbin, "y").covariate(CovariateSpec::asinh("n"));
    let result = fit(&f, &spec, &FitOptions { theta: ThetaMode::Fixed(3.0) }).unwrap();
    let (b0, b1) = (result.estimate(INTERCEPT).unwrap(), result.estimate("asinh(n)").unwrap());
    let mu = |c: f64| (b0 + b1 * c.asinh()).exp();

    let plus_one = counterfactual_count_ame(&result, &f, "n", CountDelta::PlusOne).unwrap();
    let direct = counts.iter().map(|&c| mu(c + 1.0) - mu(c)).sum::<f64>() / n as f64;
    assert_relative_eq!(plus_one.effect, direct, max_relative = 1e-10);

    let percent = counterfactual_count_ame(&result, &f, "n", CountDelta::PlusOnePercent).unwrap();
    let direct = counts.iter().map(|&c| mu(c * 1.01) - mu(c)).sum::<f64>() / n as f64;
    assert_relative_eq!(percent.effect, direct, max_relative = 1e-10);
}
