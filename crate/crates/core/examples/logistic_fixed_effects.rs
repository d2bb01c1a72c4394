//! A fixed-effects logit with two-way clustered errors on simulated data,
//! followed by average marginal effects.
//!
//! ```text
//! cargo run --release --example logistic_fixed_effects
//! ```

use agglomer::econometrics::{average_marginal_effects, fit, AmeKind, Family, FitOptions, RegressionSpec};
use agglomer::frame::Frame;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, 1.0)?;
    let (regions, periods, per_cell) = (60, 8, 40);
    let region_effect: Vec<f64> = (0..regions).map(|_| 0.8 * noise.sample(&mut rng)).collect();
    let period_effect: Vec<f64> = (0..periods).map(|_| 0.5 * noise.sample(&mut rng)).collect();

    let (mut y, mut x, mut z, mut region, mut period) = (vec![], vec![], vec![], vec![], vec![]);
    for (r, re) in region_effect.iter().enumerate() {
        for (p, pe) in period_effect.iter().enumerate() {
            for _ in 0..per_cell {
                let xi = f64::from(u8::from(rng.gen_bool(0.3)));
                let zi = noise.sample(&mut rng);
                let eta = -1.0 + 0.5 * xi - 0.25 * zi + re + pe;
                y.push(f64::from(u8::from(rng.gen_bool(1.0 / (1.0 + (-eta).exp())))));
                x.push(xi);
                z.push(zi);
                region.push(format!("r{r:02}"));
                period.push(f64::from(p as u8 + 11));
            }
        }
    }
    let mut frame = Frame::new();
    frame.push_num("y", y)?;
    frame.push_num("x", x)?;
    frame.push_num("z", z)?;
    frame.push_text("region", region)?;
    frame.push_num("period", period)?;

    let spec = RegressionSpec::new(Family::Logistic, "y")
        .covariates(["x", "z"])
        .fixed_effect(&["region"])
        .fixed_effect(&["period"])
        .clusters(&["region", "period"]);
    let result = fit(&frame, &spec, &FitOptions::default())?;

    println!("{} ({}; {})", result.vcov_type, result.inference, result.pseudo_r2_kind.as_deref().unwrap_or(""));
    for c in &result.coefficients {
        println!(
            "{:<12} {:>8.4} ({:.4}){:<3}  p = {:.4}",
            c.name,
            c.estimate.unwrap_or(f64::NAN),
            c.std_error.unwrap_or(f64::NAN),
            c.stars,
            c.p_value.unwrap_or(f64::NAN)
        );
    }
    println!(
        "n = {}, pseudo-R2 = {:.3}, BIC = {:.1}, fixed effects estimated: {}",
        result.n_used,
        result.pseudo_r2.unwrap_or(f64::NAN),
        result.bic.unwrap_or(f64::NAN),
        result.fixed_effects.len()
    );

    let ame = average_marginal_effects(&result, &frame, "x", AmeKind::Binary01)?;
    println!(
        "x from 0 to 1: {:+.2} pp ({:.2})",
        ame.percentage_points.unwrap_or(f64::NAN),
        ame.percentage_points_se.unwrap_or(f64::NAN)
    );
    let ame = average_marginal_effects(&result, &frame, "z", AmeKind::SdIncrease)?;
    println!("z up one sd: {:+.2} pp", ame.percentage_points.unwrap_or(f64::NAN));
    Ok(())
}
