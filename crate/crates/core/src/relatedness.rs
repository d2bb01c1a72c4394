//! Activity proximity from co-specialization and relatedness densities.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::econometrics::{
    fit, CovariateSpec, EconometricsError, Family, FitOptions, FitResult, RegressionSpec,
};
use crate::frame::Frame;
use crate::specialization::SpecializationMatrix;

/// `φ_{kk'} = Σ_i M_ik M_ik' / max(u_k, u_k')`, zero when both ubiquities are zero.
pub fn proximity(m: &SpecializationMatrix) -> Array2<f64> {
    let mf = m.values().mapv(f64::from);
    let co = mf.t().dot(&mf);
    let u = m.ubiquity();
    Array2::from_shape_fn(co.dim(), |(a, b)| {
        let den = u[a].max(u[b]);
        if den == 0 {
            0.0
        } else {
            co[(a, b)] / den as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Leave `k' = k` out of both sums.
    pub exclude_self: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub omega: f64,
    /// No activity has positive proximity to this one.
    pub isolated: bool,
}

/// `ω = 100 Σ_k' M_ik' φ_kk' / Σ_k' φ_kk'`.
pub fn relatedness_density(
    m: &Array2<u8>,
    phi: &Array2<f64>,
    i: usize,
    k: usize,
    options: DensityOptions,
) -> Density {
    let mut num = 0.0;
    let mut den = 0.0;
    for kp in 0..phi.ncols() {
        if options.exclude_self && kp == k {
            continue;
        }
        let p = phi[(k, kp)];
        den += p;
        num += f64::from(m[(i, kp)]) * p;
    }
    if den > 0.0 {
        Density {
            omega: (100.0 * num / den).min(100.0),
            isolated: false,
        }
    } else {
        Density {
            omega: 0.0,
            isolated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub omega: Array2<f64>,
    /// Per activity.
    pub isolated: Vec<bool>,
}

/// Densities for every region and activity of `m`; `phi` must be indexed by
/// the same activities.
pub fn density_matrix(m: &Array2<u8>, phi: &Array2<f64>, options: DensityOptions) -> Densities {
    let (nr, nk) = m.dim();
    assert_eq!(phi.dim(), (nk, nk), "proximity and specialization disagree on activities");
    let mut phi_used = phi.clone();
    if options.exclude_self {
        phi_used.diag_mut().fill(0.0);
    }
    let den = phi_used.sum_axis(ndarray::Axis(1));
    let num = m.mapv(f64::from).dot(&phi_used.t());
    let omega = Array2::from_shape_fn((nr, nk), |(i, k)| {
        // the numerator sums a subset of the denominator's terms, but in a
        // different order, so rounding can push it a few ulps past 100
        if den[k] > 0.0 {
            (100.0 * num[(i, k)] / den[k]).min(100.0)
        } else {
            0.0
        }
    });
    let isolated = den.iter().map(|&d| d <= 0.0).collect();
    Densities { omega, isolated }
}

/// Re-indexes a proximity matrix onto another activity list; activities
/// missing from the source get zero proximity to everything.
pub fn align_proximity<S: AsRef<str>>(phi: &Array2<f64>, from: &[S], to: &[S]) -> Array2<f64> {
    let pos: Vec<Option<usize>> = to
        .iter()
        .map(|c| from.iter().position(|f| f.as_ref() == c.as_ref()))
        .collect();
    Array2::from_shape_fn((to.len(), to.len()), |(a, b)| match (pos[a], pos[b]) {
        (Some(x), Some(y)) => phi[(x, y)],
        _ => 0.0,
    })
}

/// One observation of the locals-proxy regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalsProxyRow {
    pub region: String,
    pub century: u8,
    pub omega_locals: f64,
    pub omega_births: f64,
    pub omega_emi: f64,
}

/// OLS of strict-locals density on births and emigrant densities with region
/// and century fixed effects.
pub fn locals_proxy_fit(rows: &[LocalsProxyRow]) -> Result<FitResult, EconometricsError> {
    let mut frame = Frame::new();
    frame.push_num("omega_locals", rows.iter().map(|r| r.omega_locals).collect())?;
    frame.push_num("omega_births", rows.iter().map(|r| r.omega_births).collect())?;
    frame.push_num("omega_emi", rows.iter().map(|r| r.omega_emi).collect())?;
    frame.push_text("region", rows.iter().map(|r| r.region.clone()).collect())?;
    frame.push_num("century", rows.iter().map(|r| f64::from(r.century)).collect())?;
    let spec = RegressionSpec {
        family: Family::Gaussian,
        response: "omega_locals".into(),
        covariates: vec![
            CovariateSpec::identity("omega_births"),
            CovariateSpec::identity("omega_emi"),
        ],
        interactions: vec![],
        fixed_effects: vec![vec!["region".into()], vec!["century".into()]],
        clusters: vec![],
    };
    fit(&frame, &spec, &FitOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn sm(m: Array2<u8>) -> SpecializationMatrix {
        SpecializationMatrix::from_binary(m)
    }

    #[test]
    fn proximity_examples() {
        let p = proximity(&sm(array![[1, 1], [0, 0], [1, 1]]));
        assert_eq!(p[(0, 1)], 1.0);
        let p = proximity(&sm(array![[1, 0], [0, 1]]));
        assert_eq!(p[(0, 1)], 0.0);
        let p = proximity(&sm(array![[1, 1], [1, 0], [0, 0]]));
        assert_eq!(p[(0, 1)], 0.5);
        let p = proximity(&sm(array![[0, 1], [0, 1]]));
        assert_eq!(p[(0, 0)], 0.0);
        assert_eq!(p[(1, 1)], 1.0);
    }

    #[test]
    fn density_examples() {
        let phi = array![[1.0, 0.5, 0.25], [0.5, 1.0, 0.0], [0.25, 0.0, 1.0]];
        let m = array![[0u8, 1, 0], [1, 1, 1], [0, 0, 0]];
        let d = relatedness_density(&m, &phi, 0, 0, DensityOptions::default());
        assert_abs_diff_eq!(d.omega, 100.0 * 0.5 / 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(d.omega, 28.571, epsilon = 1e-3);
        assert_eq!(relatedness_density(&m, &phi, 1, 0, DensityOptions::default()).omega, 100.0);
        assert_eq!(relatedness_density(&m, &phi, 2, 0, DensityOptions::default()).omega, 0.0);
        let d = relatedness_density(&m, &phi, 0, 0, DensityOptions { exclude_self: true });
        assert_abs_diff_eq!(d.omega, 100.0 * 0.5 / 0.75, epsilon = 1e-12);
        let all = density_matrix(&m, &phi, DensityOptions::default());
        assert_abs_diff_eq!(all.omega[(0, 0)], 100.0 * 0.5 / 1.75, epsilon = 1e-12);
    }

    #[test]
    fn isolated_activity_has_zero_density() {
        let phi = Array2::zeros((2, 2));
        let m = array![[1u8, 1]];
        let d = relatedness_density(&m, &phi, 0, 0, DensityOptions::default());
        assert!(d.isolated);
        assert_eq!(d.omega, 0.0);
        assert_eq!(density_matrix(&m, &phi, DensityOptions::default()).isolated, vec![true, true]);
    }

    #[test]
    fn alignment_fills_missing_with_zero() {
        let phi = array![[1.0, 0.3], [0.3, 1.0]];
        let a = align_proximity(&phi, &["a", "c"], &["a", "b", "c"]);
        assert_eq!(a, array![[1.0, 0.0, 0.3], [0.0, 0.0, 0.0], [0.3, 0.0, 1.0]]);
    }

    fn binary(max_r: usize, max_k: usize) -> impl Strategy<Value = Array2<u8>> {
        (1..=max_r, 1..=max_k).prop_flat_map(|(r, c)| {
            prop::collection::vec(0u8..2, r * c)
                .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn proximity_symmetric_and_bounded(m in binary(8, 8)) {
            let p = proximity(&sm(m.clone()));
            prop_assert_eq!(&p, &p.t().to_owned());
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let u = sm(m).ubiquity().to_vec();
            for (k, &uk) in u.iter().enumerate() {
                if uk > 0 { prop_assert_eq!(p[(k, k)], 1.0); }
            }
        }

        #[test]
        fn densities_bounded_and_row_duplication_invariant(m in binary(6, 6), exclude_self in any::<bool>()) {
            let opts = DensityOptions { exclude_self };
            let p = proximity(&sm(m.clone()));
            let d = density_matrix(&m, &p, opts);
            prop_assert!(d.omega.iter().all(|&v| (0.0..=100.0 + 1e-12).contains(&v)));
            let doubled = ndarray::concatenate(ndarray::Axis(0), &[m.view(), m.view()]).unwrap();
            let p2 = proximity(&sm(doubled.clone()));
            prop_assert_eq!(&p, &p2);
            let d2 = density_matrix(&doubled, &p2, opts);
            for i in 0..m.nrows() {
                for k in 0..m.ncols() {
                    prop_assert_eq!(d.omega[(i, k)], d2.omega[(i, k)]);
                    prop_assert_eq!(d.omega[(i, k)], d2.omega[(i + m.nrows(), k)]);
                }
            }
        }

        #[test]
        fn adding_a_co_specialized_region_never_lowers_proximity(m in binary(6, 6), a in 0usize..6, b in 0usize..6) {
            let k = m.ncols();
            let (a, b) = (a % k, b % k);
            let before = proximity(&sm(m.clone()));
            let mut row = Array2::<u8>::zeros((1, k));
            row[(0, a)] = 1;
            row[(0, b)] = 1;
            let grown = ndarray::concatenate(ndarray::Axis(0), &[m.view(), row.view()]).unwrap();
            let after = proximity(&sm(grown));
            prop_assert!(after[(a, b)] >= before[(a, b)] - 1e-15);
        }
    }
}
