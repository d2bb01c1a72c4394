//! Sandwich covariances from per-observation influence rows.
//!
//! With bread `B` and score contributions `s_i`, the influence of row `i` is
//! `ψ_i = B s_i`, so a clustered covariance is `Σ_g (Σ_{i∈g} ψ_i)(Σ_{i∈g} ψ_i)'`
//! times `G/(G-1)`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use std::collections::BTreeMap;

use super::EconometricsError;

/// `Σ_i ψ_i ψ_i'` without any small-sample factor.
pub fn hc0_vcov(psi: &Array2<f64>) -> Array2<f64> {
    psi.t().dot(psi)
}

/// Sum of outer products of within-cluster influence totals, and the
/// number of clusters.
pub fn cluster_meat(psi: &Array2<f64>, ids: &[u64]) -> (Array2<f64>, usize) {
    let k = psi.ncols();
    let mut totals: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (r, &g) in ids.iter().enumerate() {
        let t = totals.entry(g).or_insert_with(|| vec![0.0; k]);
        for j in 0..k {
            t[j] += psi[(r, j)];
        }
    }
    let mut m = Array2::zeros((k, k));
    for t in totals.values() {
        for a in 0..k {
            for b in 0..k {
                m[(a, b)] += t[a] * t[b];
            }
        }
    }
    (m, totals.len())
}

fn corrected(psi: &Array2<f64>, ids: &[u64], name: &str) -> Result<(Array2<f64>, usize), EconometricsError> {
    let (m, g) = cluster_meat(psi, ids);
    if g < 2 {
        return Err(EconometricsError::TooFewClusters {
            factor: name.into(),
            clusters: g,
        });
    }
    Ok((m * (g as f64 / (g as f64 - 1.0)), g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredVcov {
    pub matrix: Array2<f64>,
    pub cluster_counts: Vec<usize>,
    /// Negative eigenvalues of a two-way combination were set to zero.
    pub floored: bool,
}

/// One-way or two-way (`V_A + V_B - V_AB`) clustered covariance.
pub fn clustered_vcov(
    psi: &Array2<f64>,
    dims: &[(&str, &[u32])],
) -> Result<ClusteredVcov, EconometricsError> {
    match dims {
        [(name, ids)] => {
            let ids: Vec<u64> = ids.iter().map(|&v| v as u64).collect();
            let (m, g) = corrected(psi, &ids, name)?;
            Ok(ClusteredVcov {
                matrix: m,
                cluster_counts: vec![g],
                floored: false,
            })
        }
        [(na, a), (nb, b)] => {
            let ia: Vec<u64> = a.iter().map(|&v| v as u64).collect();
            let ib: Vec<u64> = b.iter().map(|&v| v as u64).collect();
            let iab: Vec<u64> = a
                .iter()
                .zip(b.iter())
                .map(|(&x, &y)| ((x as u64) << 32) | y as u64)
                .collect();
            let (va, ga) = corrected(psi, &ia, na)?;
            let (vb, gb) = corrected(psi, &ib, nb)?;
            let (vab, _) = corrected(psi, &iab, &format!("{na}:{nb}"))?;
            let v = va + vb - vab;
            let (matrix, floored) = floor_eigenvalues(&v);
            if floored {
                log::warn!("two-way clustered covariance was indefinite; negative eigenvalues set to zero");
            }
            Ok(ClusteredVcov {
                matrix,
                cluster_counts: vec![ga, gb],
                floored,
            })
        }
        _ => Err(EconometricsError::InvalidSpec(format!(
            "clustering supports one or two dimensions, got {}",
            dims.len()
        ))),
    }
}

/// Symmetric part with negative eigenvalues replaced by zero.
pub fn floor_eigenvalues(v: &Array2<f64>) -> (Array2<f64>, bool) {
    let k = v.nrows();
    let sym = (v + &v.t()) * 0.5;
    if k == 0 {
        return (sym, false);
    }
    let m = DMatrix::from_fn(k, k, |i, j| sym[(i, j)]);
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale) {
        return (sym, false);
    }
    let floored = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    (Array2::from_shape_fn((k, k), |(i, j)| rebuilt[(i, j)]), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn singleton_clusters_equal_hc0_times_correction() {
        let psi = array![[1.0, 0.5], [-0.3, 0.2], [0.7, -1.1], [0.1, 0.4]];
        let ids: Vec<u32> = (0..4).collect();
        let v = clustered_vcov(&psi, &[("id", &ids)]).unwrap();
        let hc = hc0_vcov(&psi) * (4.0 / 3.0);
        for (a, b) in v.matrix.iter().zip(hc.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn one_cluster_is_too_few() {
        let psi = array![[1.0], [2.0]];
        assert!(matches!(
            clustered_vcov(&psi, &[("g", &[0, 0])]),
            Err(EconometricsError::TooFewClusters { clusters: 1, .. })
        ));
    }

    #[test]
    fn flooring_removes_negative_directions() {
        let (m, f) = floor_eigenvalues(&array![[1.0, 0.0], [0.0, -1.0]]);
        assert!(f);
        assert!((m[(1, 1)]).abs() < 1e-15 && (m[(0, 0)] - 1.0).abs() < 1e-15);
        let (_, f) = floor_eigenvalues(&array![[2.0, 1.0], [1.0, 2.0]]);
        assert!(!f);
    }
}
