//! Negative-binomial count models: a direct fit with known dispersion, then
//! the model-based expectations that replace the naive ones in the ratios.
//!
//! ```text
//! cargo run --release --example negative_binomial_expectations
//! ```

use agglomer::corpus::{Century, Role};
use agglomer::econometrics::{fit, CovariateSpec, Family, FitOptions, RegressionSpec};
use agglomer::frame::Frame;
use agglomer::pipeline::synth::{synthetic_corpus, SynthConfig};
use agglomer::pipeline::{compute_measures, PanelOptions};
use agglomer::specialization::ExpectationModel;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Gamma-Poisson mixture with theta = 2, so Var = mu + mu^2 / 2.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let theta = 2.0;
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for _ in 0..20_000 {
        let xi: f64 = rng.gen_range(-1.0..1.0);
        let mu = (0.5 + 0.8 * xi).exp();
        let lambda = Gamma::new(theta, mu / theta)?.sample(&mut rng);
        y.push(Poisson::new(lambda.max(1e-12))?.sample(&mut rng));
        x.push(xi);
    }
    let mut frame = Frame::new();
    frame.push_num("y", y)?;
    frame.push_num("x", x)?;
    let spec = RegressionSpec::new(Family::Negbin, "y").covariate(CovariateSpec::identity("x"));
    let result = fit(&frame, &spec, &FitOptions::default())?;
    let d = result.dispersion.as_ref().expect("count models report dispersion");
    println!(
        "slope {:.3} (truth 0.8), theta {:.3} +/- {:.3} (truth 2)",
        result.estimate("x").unwrap_or(f64::NAN),
        d.theta.unwrap_or(f64::INFINITY),
        d.std_error.unwrap_or(f64::NAN)
    );

    let corpus = synthetic_corpus(&SynthConfig::default(), 5)?;
    let measures = compute_measures(
        &corpus,
        PanelOptions {
            expectation: ExpectationModel::NegBin,
            spatial: false,
            ..Default::default()
        },
    )?;
    for e in &measures.expectation_fits {
        let theta = e.fit.dispersion.as_ref().and_then(|d| d.theta);
        println!(
            "{:>7}: n = {:>6}, lagged count {:+.4}, lagged births ratio {:+.4}, theta {:.2}",
            e.role.to_string(),
            e.fit.n_used,
            e.fit.estimate("N_lag").unwrap_or(f64::NAN),
            e.fit.estimate("S_births_lag").unwrap_or(f64::NAN),
            theta.unwrap_or(f64::INFINITY)
        );
    }
    for (role, err) in &measures.expectation_failures {
        println!("{role}: kept naive expectations ({err})");
    }

    let immi = measures.role(Century::new(19)?, Role::Immigrants).expect("immigrants in the 19th century");
    let share = immi.set.m.values().iter().filter(|&&v| v == 1).count() as f64 / immi.set.m.values().len() as f64;
    println!("19th-century immigrant cells specialized under model expectations: {:.1}%", 100.0 * share);
    Ok(())
}
