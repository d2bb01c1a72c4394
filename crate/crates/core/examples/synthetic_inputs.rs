//! Writes the four input tables of a synthetic corpus, ready for
//! `agglomer ingest`.
//!
//! ```text
//! cargo run --example synthetic_inputs -- target/demo 7
//! ```

use agglomer::corpus::write_input_tables;
use agglomer::pipeline::synth::{synthetic_corpus, SynthConfig};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "target/demo".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let corpus = synthetic_corpus(&SynthConfig::default(), seed)?;
    write_input_tables(&corpus, &dir)?;
    println!(
        "{} biographies, {} regions, {} occupations written to {}",
        corpus.biographies.len(),
        corpus.regions.len(),
        corpus.taxonomy.occupations().len(),
        dir.display()
    );
    Ok(())
}
