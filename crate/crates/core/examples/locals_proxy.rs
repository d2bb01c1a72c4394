//! Whether births and emigrant densities stand in for the density of people
//! who were born and died in the same region.
//!
//! ```text
//! cargo run --release --example locals_proxy
//! ```

use agglomer::pipeline::synth::{synthetic_corpus, SynthConfig};
use agglomer::pipeline::{compute_measures, locals_proxy_rows, PanelOptions};
use agglomer::relatedness::locals_proxy_fit;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthetic_corpus(&SynthConfig::default(), 21)?;
    let measures = compute_measures(
        &corpus,
        PanelOptions {
            spatial: false,
            ..Default::default()
        },
    )?;
    let rows = locals_proxy_rows(&measures);
    let fit = locals_proxy_fit(&rows)?;
    println!("{} region-activity-century cells", fit.n_used);
    for name in ["omega_births", "omega_emi"] {
        let c = fit.coefficient(name).expect("both densities are estimated");
        println!(
            "{name:<13} {:.3} ({:.3}){}",
            c.estimate.unwrap_or(f64::NAN),
            c.std_error.unwrap_or(f64::NAN),
            c.stars
        );
    }
    println!("R2 of fitted against actual: {:.3}", fit.r_squared.unwrap_or(f64::NAN));
    Ok(())
}
