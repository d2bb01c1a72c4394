//! Inverse-distance weights between region centroids and spatial lags.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::corpus::RegionRecord;

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Distances below this are raised to it before inversion.
pub const MIN_DISTANCE_KM: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("region at position {0} has no neighbours with positive weight")]
    IsolatedRegion(usize),
    #[error("weights cover {weights} regions but the field has {field}")]
    ShapeMismatch { weights: usize, field: usize },
}

pub fn haversine_coords_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

pub fn haversine_km(a: &RegionRecord, b: &RegionRecord) -> f64 {
    haversine_coords_km(a.centroid_lat, a.centroid_lon, b.centroid_lat, b.centroid_lon)
}

/// Symmetric `1/d` weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: Array2<f64>,
}

impl WeightMatrix {
    pub fn from_distances(d: &Array2<f64>) -> Self {
        let n = d.nrows();
        let mut floored = 0usize;
        let w = Array2::from_shape_fn((n, n), |(a, b)| {
            if a == b {
                return 0.0;
            }
            let mut dist = d[(a, b)];
            if dist < MIN_DISTANCE_KM {
                floored += 1;
                dist = MIN_DISTANCE_KM;
            }
            1.0 / dist
        });
        if floored > 0 {
            log::info!(
                "{} region pairs closer than {MIN_DISTANCE_KM} km; distance floored",
                floored / 2
            );
        }
        WeightMatrix { w }
    }

    pub fn from_regions(regions: &[&RegionRecord]) -> Self {
        let n = regions.len();
        let d = Array2::from_shape_fn((n, n), |(a, b)| haversine_km(regions[a], regions[b]));
        Self::from_distances(&d)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    /// `ρ_i = Σ_{i'} W_{i'i} x_{i'} / Σ_{i'} W_{i'i}`.
    pub fn lag(&self, x: ArrayView1<f64>) -> Result<Array1<f64>, SpatialError> {
        if x.len() != self.len() {
            return Err(SpatialError::ShapeMismatch {
                weights: self.len(),
                field: x.len(),
            });
        }
        let den = self.w.sum_axis(Axis(0));
        let num = self.w.t().dot(&x);
        num.iter()
            .zip(den.iter())
            .enumerate()
            .map(|(i, (&a, &b))| {
                if b > 0.0 {
                    Ok(a / b)
                } else {
                    Err(SpatialError::IsolatedRegion(i))
                }
            })
            .collect()
    }

    /// Lags every column of a regions x activities field.
    pub fn lag_columns(&self, field: &Array2<f64>) -> Result<Array2<f64>, SpatialError> {
        let mut out = Array2::zeros(field.dim());
        for (k, col) in field.columns().into_iter().enumerate() {
            out.column_mut(k).assign(&self.lag(col)?);
        }
        Ok(out)
    }
}

/// Spatial lag of one binary specialization column.
pub fn spatial_lag_m(w: &WeightMatrix, m: ArrayView1<f64>) -> Result<Array1<f64>, SpatialError> {
    w.lag(m)
}

/// Spatial lag of one relatedness-density column.
pub fn spatial_lag_omega(
    w: &WeightMatrix,
    omega: ArrayView1<f64>,
) -> Result<Array1<f64>, SpatialError> {
    w.lag(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn line() -> WeightMatrix {
        let d = array![[0.0, 100.0, 200.0], [100.0, 0.0, 100.0], [200.0, 100.0, 0.0]];
        WeightMatrix::from_distances(&d)
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_coords_km(48.8, 2.3, 48.8, 2.3), 0.0);
        assert_abs_diff_eq!(
            haversine_coords_km(0.0, 0.0, 0.0, 180.0),
            std::f64::consts::PI * EARTH_RADIUS_KM,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(haversine_coords_km(0.0, 0.0, 0.0, 180.0), 20015.1, epsilon = 0.1);
    }

    #[test]
    fn lag_examples() {
        let w = line();
        let r = spatial_lag_m(&w, array![0.0, 1.0, 0.0].view()).unwrap();
        assert_abs_diff_eq!(r[0], 2.0 / 3.0, epsilon = 1e-15);
        let r = spatial_lag_m(&w, array![0.0, 1.0, 1.0].view()).unwrap();
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-15);
        let r = spatial_lag_omega(&w, array![0.0, 40.0, 10.0].view()).unwrap();
        assert_abs_diff_eq!(r[0], 30.0, epsilon = 1e-12);
        let r = spatial_lag_omega(&w, array![50.0, 50.0, 50.0].view()).unwrap();
        assert!(r.iter().all(|&v| (v - 50.0).abs() < 1e-12));
    }

    #[test]
    fn coincident_centroids_are_floored() {
        let w = WeightMatrix::from_distances(&array![[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(w.values()[(0, 1)], 1.0);
        assert_eq!(w.values()[(0, 0)], 0.0);
    }

    #[test]
    fn single_region_is_isolated() {
        let w = WeightMatrix::from_distances(&array![[0.0]]);
        assert_eq!(w.lag(array![1.0].view()), Err(SpatialError::IsolatedRegion(0)));
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-80.0f64..80.0, -179.0f64..179.0), 2..12)
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in (-90.0f64..90.0, -180.0f64..180.0), b in (-90.0f64..90.0, -180.0f64..180.0)) {
            prop_assert_eq!(haversine_coords_km(a.0, a.1, b.0, b.1), haversine_coords_km(b.0, b.1, a.0, a.1));
        }

        #[test]
        fn lags_are_convex_and_scale_free(pts in points(), seed in any::<u64>(), c in 0.5f64..50.0) {
            use rand::{Rng, SeedableRng};
            let n = pts.len();
            let d = Array2::from_shape_fn((n, n), |(a, b)| {
                haversine_coords_km(pts[a].0, pts[a].1, pts[b].0, pts[b].1) + if a == b { 0.0 } else { 5.0 }
            });
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m: Array1<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
            let om: Array1<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let w = WeightMatrix::from_distances(&d);
            let ws = WeightMatrix::from_distances(&d.mapv(|v| v * c));
            let rm = w.lag(m.view()).unwrap();
            let ro = w.lag(om.view()).unwrap();
            prop_assert!(rm.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            let (lo, hi) = om.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            prop_assert!(ro.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            let rs = ws.lag(om.view()).unwrap();
            for (a, b) in ro.iter().zip(rs.iter()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
            prop_assert_eq!(w.values(), &w.values().t().to_owned());
        }
    }
}
