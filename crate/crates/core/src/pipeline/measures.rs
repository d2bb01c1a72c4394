//! Per-century specialization, proximity, density and spatial lags for every role.

use ndarray::Array2;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::{PanelOptions, PipelineError, ProximityChoice};
use crate::corpus::{filter_sparse, tabulate_counts, Century, Corpus, CorpusError, CountTensor, FilteredIndex, Role};
use crate::econometrics::{fit, CovariateSpec, Family, FitOptions, FitResult, RegressionSpec};
use crate::frame::Frame;
use crate::relatedness::{align_proximity, density_matrix, proximity, Densities, LocalsProxyRow};
use crate::spatial::WeightMatrix;
use crate::specialization::{expected_naive, rca_ratio, ExpectationModel, SpecializationSet};

#[derive(Debug, Clone)]
pub struct RoleMeasures {
    pub index: FilteredIndex,
    pub set: SpecializationSet,
    /// Proximity over `index.occupations`.
    pub phi: Array2<f64>,
    pub densities: Densities,
}

/// Lags of births specialization and density over the births index.
#[derive(Debug, Clone)]
pub struct SpatialLags {
    pub rho_m: Array2<f64>,
    pub rho_omega: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct CenturyMeasures {
    pub century: Century,
    pub roles: BTreeMap<Role, RoleMeasures>,
    /// Pooled births and deaths on the intersection of their indices.
    pub joint: Option<RoleMeasures>,
    pub spatial: Option<SpatialLags>,
}

/// Pooled count model behind the model-based expectations of one role.
#[derive(Debug, Clone)]
pub struct ExpectationFit {
    pub role: Role,
    pub fit: FitResult,
}

#[derive(Debug, Clone)]
pub struct Measures {
    pub tensor: CountTensor,
    pub options: PanelOptions,
    pub centuries: BTreeMap<Century, CenturyMeasures>,
    pub expectation_fits: Vec<ExpectationFit>,
    /// Roles whose count model failed; their expectations stay naive.
    pub expectation_failures: Vec<(Role, String)>,
}

impl Measures {
    pub fn role(&self, t: Century, role: Role) -> Option<&RoleMeasures> {
        self.centuries.get(&t)?.roles.get(&role)
    }

    pub fn expectation_fit(&self, role: Role) -> Option<&FitResult> {
        self.expectation_fits.iter().find(|e| e.role == role).map(|e| &e.fit)
    }
}

type Indices = BTreeMap<(Century, Role), FilteredIndex>;

fn sparse_indices(n: &CountTensor) -> Result<Indices, CorpusError> {
    let mut out = BTreeMap::new();
    for t in Century::all() {
        for role in Role::ALL {
            match filter_sparse(n, t, role) {
                Ok(idx) => {
                    out.insert((t, role), idx);
                }
                Err(CorpusError::EmptyAfterFilter { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Naive births ratio on the whole unfiltered slice.
fn births_ratio_full(n: &CountTensor, t: Century) -> Array2<f64> {
    let slice = n.slice(t, Role::Births).mapv(f64::from);
    match expected_naive(&slice) {
        Ok(e) => rca_ratio(&slice, &e).unwrap_or_else(|_| Array2::zeros(slice.dim())),
        Err(_) => Array2::zeros(slice.dim()),
    }
}

/// Pooled negative-binomial model of one role's counts on its filtered cells,
/// with the lagged count and lagged births ratio as regressors and
/// region-century and occupation-century effects. Returns fitted means per
/// century on the filtered submatrix.
fn negbin_expectations(
    n: &CountTensor,
    indices: &Indices,
    role: Role,
) -> Result<(BTreeMap<Century, Array2<f64>>, FitResult), PipelineError> {
    let mut y = Vec::new();
    let mut lag = Vec::new();
    let mut s = Vec::new();
    let mut region = Vec::new();
    let mut occupation = Vec::new();
    let mut century = Vec::new();
    let mut cells: Vec<(Century, usize, usize)> = Vec::new();
    for t in Century::all() {
        let (Some(prev), Some(idx)) = (t.previous(), indices.get(&(t, role))) else {
            continue;
        };
        let ratio = births_ratio_full(n, prev);
        for (a, &i) in idx.regions.iter().enumerate() {
            for (b, &k) in idx.occupations.iter().enumerate() {
                y.push(f64::from(n.get(i, k, t, role)));
                lag.push(f64::from(n.get(i, k, prev, role)));
                s.push(ratio[(i, k)]);
                region.push(n.regions()[i].clone());
                occupation.push(n.occupations()[k].clone());
                century.push(f64::from(t.get()));
                cells.push((t, a, b));
            }
        }
    }
    let mut frame = Frame::new();
    frame.push_num("N", y)?;
    frame.push_num("N_lag", lag)?;
    frame.push_num("S_births_lag", s)?;
    frame.push_text("region", region)?;
    frame.push_text("occupation", occupation)?;
    frame.push_num("century", century)?;
    let spec = RegressionSpec::new(Family::Negbin, "N")
        .covariate(CovariateSpec::identity("N_lag"))
        .covariate(CovariateSpec::identity("S_births_lag"))
        .fixed_effect(&["region", "century"])
        .fixed_effect(&["occupation", "century"]);
    let result = fit(&frame, &spec, &FitOptions::default())?;
    let mut out: BTreeMap<Century, Array2<f64>> = BTreeMap::new();
    for (&row, &mu) in result.rows.iter().zip(&result.fitted) {
        let (t, a, b) = cells[row];
        let idx = &indices[&(t, role)];
        out.entry(t)
            .or_insert_with(|| Array2::from_elem((idx.regions.len(), idx.occupations.len()), f64::NAN))
            [(a, b)] = mu;
    }
    Ok((out, result))
}

fn role_set(
    n: &CountTensor,
    idx: &FilteredIndex,
    model_nhat: Option<&Array2<f64>>,
) -> Option<SpecializationSet> {
    let counts = n.submatrix(idx);
    let naive = match expected_naive(&counts) {
        Ok(e) => e,
        Err(e) => {
            log::warn!("century {}, role {}: {e}", idx.century, idx.role);
            return None;
        }
    };
    let nhat = match model_nhat {
        // cells left out of the count model keep their naive expectation
        Some(m) => Array2::from_shape_fn(counts.dim(), |c| if m[c].is_finite() { m[c] } else { naive[c] }),
        None => naive,
    };
    SpecializationSet::with_expectation(counts, nhat).ok()
}

fn century_measures(
    corpus: &Corpus,
    n: &CountTensor,
    indices: &Indices,
    model: &BTreeMap<Role, BTreeMap<Century, Array2<f64>>>,
    options: PanelOptions,
    t: Century,
) -> Result<CenturyMeasures, PipelineError> {
    let mut sets: BTreeMap<Role, (FilteredIndex, SpecializationSet)> = BTreeMap::new();
    for role in Role::ALL {
        let Some(idx) = indices.get(&(t, role)) else {
            continue;
        };
        let nhat = model.get(&role).and_then(|m| m.get(&t));
        if let Some(set) = role_set(n, idx, nhat) {
            sets.insert(role, (idx.clone(), set));
        }
    }

    let joint = match (indices.get(&(t, Role::Births)), indices.get(&(t, Role::Deaths))) {
        (Some(b), Some(d)) => {
            let idx = b.intersect(d);
            let births = n.submatrix_for(&idx, Role::Births);
            let deaths = n.submatrix_for(&idx, Role::Deaths);
            match SpecializationSet::joint(&births, &deaths) {
                Ok(set) if !idx.regions.is_empty() && !idx.occupations.is_empty() => {
                    let phi = proximity(&set.m);
                    let densities = density_matrix(set.m.values(), &phi, options.density);
                    Some(RoleMeasures {
                        index: idx,
                        set,
                        phi,
                        densities,
                    })
                }
                _ => None,
            }
        }
        _ => None,
    };

    let mut roles = BTreeMap::new();
    for (role, (idx, set)) in sets {
        let phi = match (options.proximity, &joint) {
            (ProximityChoice::Joint, Some(j)) => align_proximity(
                &j.phi,
                &j.index.occupation_codes(n),
                &idx.occupation_codes(n),
            ),
            (ProximityChoice::Joint, None) => {
                log::warn!("century {t}: no joint births/deaths matrix; role {role} uses its own proximity");
                proximity(&set.m)
            }
            (ProximityChoice::Separate, _) => proximity(&set.m),
        };
        let densities = density_matrix(set.m.values(), &phi, options.density);
        roles.insert(
            role,
            RoleMeasures {
                index: idx,
                set,
                phi,
                densities,
            },
        );
    }

    let spatial = match roles.get(&Role::Births) {
        Some(b) if options.spatial => {
            let records: Vec<_> = b
                .index
                .region_codes(n)
                .into_iter()
                .map(|c| corpus.regions.get(c).expect("tensor regions come from the registry"))
                .collect();
            let w = WeightMatrix::from_regions(&records);
            Some(SpatialLags {
                rho_m: w.lag_columns(&b.set.m.values().mapv(f64::from))?,
                rho_omega: w.lag_columns(&b.densities.omega)?,
            })
        }
        _ => None,
    };

    Ok(CenturyMeasures {
        century: t,
        roles,
        joint,
        spatial,
    })
}

/// Every per-century measure the panel draws on.
pub fn compute_measures(corpus: &Corpus, options: PanelOptions) -> Result<Measures, PipelineError> {
    let n = tabulate_counts(corpus)?;
    let indices = sparse_indices(&n)?;

    let mut model = BTreeMap::new();
    let mut expectation_fits = Vec::new();
    let mut expectation_failures = Vec::new();
    if options.expectation == ExpectationModel::NegBin {
        let fits: Vec<_> = Role::ALL
            .par_iter()
            .map(|&role| (role, negbin_expectations(&n, &indices, role)))
            .collect();
        for (role, r) in fits {
            match r {
                Ok((nhat, f)) => {
                    model.insert(role, nhat);
                    expectation_fits.push(ExpectationFit { role, fit: f });
                }
                Err(e) => {
                    log::warn!("count model for role {role} failed, keeping naive expectations: {e}");
                    expectation_failures.push((role, e.to_string()));
                }
            }
        }
    }

    let per_century: Vec<_> = Century::all()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|t| century_measures(corpus, &n, &indices, &model, options, t))
        .collect();
    let mut centuries = BTreeMap::new();
    for m in per_century {
        let m = m?;
        if !m.roles.is_empty() {
            centuries.insert(m.century, m);
        }
    }
    Ok(Measures {
        tensor: n,
        options,
        centuries,
        expectation_fits,
        expectation_failures,
    })
}

/// Cells present in the strict-locals, births and emigrant matrices of the
/// same century, with the three densities side by side.
pub fn locals_proxy_rows(measures: &Measures) -> Vec<LocalsProxyRow> {
    let n = &measures.tensor;
    let mut rows = Vec::new();
    for (t, c) in &measures.centuries {
        let (Some(locals), Some(births), Some(emi)) = (
            c.roles.get(&Role::Locals),
            c.roles.get(&Role::Births),
            c.roles.get(&Role::Emigrants),
        ) else {
            continue;
        };
        for (a, &i) in locals.index.regions.iter().enumerate() {
            for (b, &k) in locals.index.occupations.iter().enumerate() {
                let at = |m: &RoleMeasures| {
                    Some((m.index.position_of_region(i)?, m.index.position_of_occupation(k)?))
                };
                if let (Some(pb), Some(pe)) = (at(births), at(emi)) {
                    rows.push(LocalsProxyRow {
                        region: n.regions()[i].clone(),
                        century: t.get(),
                        omega_locals: locals.densities.omega[(a, b)],
                        omega_births: births.densities.omega[pb],
                        omega_emi: emi.densities.omega[pe],
                    });
                }
            }
        }
    }
    rows
}
