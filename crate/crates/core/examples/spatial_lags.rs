//! Inverse-distance weights between region centroids and the spatial lags of
//! specialization and density.
//!
//! ```text
//! cargo run --example spatial_lags
//! ```

use agglomer::corpus::RegionRecord;
use agglomer::spatial::{haversine_km, spatial_lag_m, spatial_lag_omega, WeightMatrix};
use ndarray::array;

fn region(code: &str, lat: f64, lon: f64) -> RegionRecord {
    RegionRecord {
        region_code: code.into(),
        name: code.into(),
        country: code[..2].into(),
        centroid_lat: lat,
        centroid_lon: lon,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let regions = [
        region("FR10", 48.86, 2.35),
        region("BE10", 50.85, 4.35),
        region("NL32", 52.37, 4.90),
        region("ITI4", 41.90, 12.50),
    ];
    println!("Paris-Brussels: {:.1} km", haversine_km(&regions[0], &regions[1]));
    println!("Paris-Rome:     {:.1} km", haversine_km(&regions[0], &regions[3]));

    let refs: Vec<&RegionRecord> = regions.iter().collect();
    let w = WeightMatrix::from_regions(&refs);
    println!("inverse-distance weights (1/km):\n{:.4}", w.values());

    // Specialization in one activity and the density around it.
    let m = array![0.0, 1.0, 1.0, 0.0];
    let omega = array![20.0, 65.0, 80.0, 10.0];
    println!("rho_M     = {:.3}", spatial_lag_m(&w, m.view())?);
    println!("rho_omega = {:.2}", spatial_lag_omega(&w, omega.view())?);
    Ok(())
}
