//! Proximity between activities and relatedness densities of regions, with
//! the separate and joint proximity variants, and an SVG of the network.
//!
//! ```text
//! cargo run --release --example relatedness_network
//! ```

use agglomer::corpus::{Century, Role};
use agglomer::pipeline::synth::{synthetic_corpus, SynthConfig};
use agglomer::pipeline::{compute_measures, PanelOptions, ProximityChoice};
use agglomer::relatedness::{density_matrix, proximity, relatedness_density, DensityOptions};
use agglomer::specialization::SpecializationMatrix;
use agglomer::svg::{network_svg, NetworkOptions};
use ndarray::array;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Three regions, three activities; the first two share two regions.
    let m = SpecializationMatrix::from_binary(array![[1, 1, 0], [1, 1, 0], [0, 1, 1]]);
    let phi = proximity(&m);
    println!("proximity:\n{phi:.3}");
    let d = relatedness_density(m.values(), &phi, 2, 0, DensityOptions::default());
    println!("density of region 2 around activity 0: {:.1}%", d.omega);
    let without_self = density_matrix(m.values(), &phi, DensityOptions { exclude_self: true });
    println!("densities without the self term:\n{:.1}", without_self.omega);

    let corpus = synthetic_corpus(&SynthConfig::default(), 3)?;
    let t = Century::new(18)?;
    for proximity_choice in [ProximityChoice::Separate, ProximityChoice::Joint] {
        let measures = compute_measures(
            &corpus,
            PanelOptions {
                proximity: proximity_choice,
                spatial: false,
                ..Default::default()
            },
        )?;
        let immi = measures.role(t, Role::Immigrants).expect("immigrants in the 18th century");
        let mean = immi.densities.omega.mean().unwrap_or(f64::NAN);
        println!("{proximity_choice:>8} proximity: mean immigrant density {mean:.2}");
        if proximity_choice == ProximityChoice::Separate {
            let codes = immi.index.occupation_codes(&measures.tensor);
            let counts = immi.set.n.sum_axis(ndarray::Axis(0)).to_vec();
            let options = NetworkOptions {
                min_proximity: 0.6,
                title: "immigrant proximity, 18th century".into(),
                ..Default::default()
            };
            let path = std::env::temp_dir().join("agglomer-immigrant-network.svg");
            std::fs::write(&path, network_svg(&immi.phi, &codes, &counts, &options))?;
            println!("network written to {}", path.display());
        }
    }
    Ok(())
}
