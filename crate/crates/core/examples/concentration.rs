//! How concentrated births and deaths are across regions, century by century.
//!
//! ```text
//! cargo run --release --example concentration
//! ```

use agglomer::concentration::{concentration_series, effective_places, entropy};
use agglomer::corpus::tabulate_counts;
use agglomer::pipeline::synth::{synthetic_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Four equally likely places carry two bits; one dominant place far less.
    for counts in [vec![5u64, 5, 5, 5], vec![17, 1, 1, 1], vec![9]] {
        let h = entropy(&counts)?;
        println!("{counts:?}: H = {h:.3} bits, E = {:.2} places", effective_places(h));
    }

    let corpus = synthetic_corpus(&SynthConfig::default(), 11)?;
    let n = tabulate_counts(&corpus)?;
    println!("\ncentury  E_births  E_deaths");
    for row in concentration_series(&n) {
        let show = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        println!("{:>7}  {:>8}  {:>8}", row.century, show(row.e_births), show(row.e_deaths));
    }
    Ok(())
}
