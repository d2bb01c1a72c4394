//! Spatial concentration of births and deaths: Shannon entropy in bits and
//! the effective number of places `E = 2^H`.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Century, CountTensor, Role};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConcentrationError {
    #[error("entropy of an all-zero distribution is undefined")]
    EmptyDistribution,
}

pub fn entropy(counts: &[u64]) -> Result<f64, ConcentrationError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(ConcentrationError::EmptyDistribution);
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // rounding can leave a tiny negative for a single-place distribution
    Ok(h.max(0.0))
}

pub fn effective_places(h: f64) -> f64 {
    h.exp2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub century: u8,
    pub h_births: Option<f64>,
    pub e_births: Option<f64>,
    pub h_deaths: Option<f64>,
    pub e_deaths: Option<f64>,
}

/// One row per century from the unfiltered regional totals; empty centuries
/// yield missing values.
pub fn concentration_series(n: &CountTensor) -> Vec<ConcentrationRow> {
    Century::all()
        .map(|t| {
            let h_births = entropy(&n.region_totals(t, Role::Births)).ok();
            let h_deaths = entropy(&n.region_totals(t, Role::Deaths)).ok();
            ConcentrationRow {
                century: t.get(),
                h_births,
                e_births: h_births.map(effective_places),
                h_deaths,
                e_deaths: h_deaths.map(effective_places),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_abs_diff_eq!(entropy(&[1, 1, 1, 1]).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(entropy(&[7]).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy(&[3, 1]).unwrap(), 0.811278124459133, epsilon = 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(ConcentrationError::EmptyDistribution));
        assert_eq!(effective_places(2.0), 4.0);
        assert_eq!(effective_places(0.0), 1.0);
    }

    fn counts() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..1000, 1..50).prop_filter("nonzero", |v| v.iter().any(|&c| c > 0))
    }

    proptest! {
        #[test]
        fn permutation_invariant(v in counts(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((entropy(&v).unwrap() - entropy(&w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn scale_invariant(v in counts(), c in 1u64..20) {
            let w: Vec<u64> = v.iter().map(|x| x * c).collect();
            prop_assert!((entropy(&v).unwrap() - entropy(&w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn merging_never_increases(v in counts()) {
            let h = entropy(&v).unwrap();
            for a in 0..v.len() {
                for b in (a + 1)..v.len() {
                    let mut w = v.clone();
                    w[a] += w[b];
                    w.remove(b);
                    prop_assert!(entropy(&w).unwrap() <= h + 1e-12);
                }
            }
        }

        #[test]
        fn bounded_by_active_places(v in counts()) {
            let h = entropy(&v).unwrap();
            let active = v.iter().filter(|&&c| c > 0).count() as f64;
            prop_assert!(h >= 0.0 && h <= active.log2() + 1e-12);
            prop_assert!(effective_places(h) <= active * (1.0 + 1e-12));
        }
    }
}
