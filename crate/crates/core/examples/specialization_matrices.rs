//! Revealed comparative advantage from a small count matrix: expectations,
//! ratios, the binary matrix and its nested ordering.
//!
//! ```text
//! cargo run --example specialization_matrices
//! ```

use agglomer::specialization::{
    expected_naive, joint_ratio, nested_sort, rca_ratio, weighted_mean_ratio, SpecializationSet,
};
use ndarray::array;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let regions = ["Florence", "Paris", "Vienna", "Weimar"];
    let activities = ["painting", "music", "philosophy", "physics"];
    let births = array![
        [30.0, 2.0, 4.0, 4.0],
        [20.0, 10.0, 12.0, 18.0],
        [2.0, 25.0, 3.0, 5.0],
        [1.0, 6.0, 9.0, 2.0],
    ];

    let nhat = expected_naive(&births)?;
    let r = rca_ratio(&births, &nhat)?;
    println!("expected counts:\n{nhat:.2}\nratios:\n{r:.2}");
    println!("N̂-weighted mean ratio = {:.6}", weighted_mean_ratio(&nhat, &r));

    let set = SpecializationSet::naive(births.clone())?;
    let (rows, cols) = nested_sort(&set.m, &regions, &activities);
    println!("\nbinary matrix, regions by diversity and activities by ubiquity:");
    print!("{:>10}", "");
    for &k in &cols {
        print!("{:>11}", activities[k]);
    }
    println!();
    for &i in &rows {
        print!("{:>10}", regions[i]);
        for &k in &cols {
            print!("{:>11}", set.m.get(i, k));
        }
        println!("   diversity {}", set.m.diversity()[i]);
    }

    // Pooling births with deaths: deaths add Paris and Vienna as destinations.
    let deaths = array![
        [12.0, 1.0, 2.0, 1.0],
        [30.0, 20.0, 25.0, 30.0],
        [3.0, 30.0, 5.0, 6.0],
        [0.0, 3.0, 6.0, 1.0],
    ];
    println!("\njoint ratios:\n{:.2}", joint_ratio(&births, &deaths)?);
    Ok(())
}
