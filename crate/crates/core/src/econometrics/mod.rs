//! Maximum-likelihood logistic, negative-binomial (NB2) and Gaussian models
//! with interacted fixed effects, clustered covariances and marginal effects.

mod design;
mod glm;
mod linalg;
mod margins;
mod spec;
mod vcov;

pub use design::{build_design, ClusterDim, Design, FeFactor, Operand, Term, INTERCEPT};
pub use glm::{
    logistic_gradient, logistic_loglik, negbin_gradient, negbin_loglik, sigmoid, ThetaMode,
};
pub use linalg::{cholesky, chol_inverse, chol_solve};
pub use margins::{
    average_marginal_effects, counterfactual_count_ame, AmeKind, CountDelta, MarginalEffect,
};
pub(crate) use spec::factor_operand;
pub use spec::{CovariateSpec, Family, RegressionSpec, Transform};
pub use vcov::{cluster_meat, clustered_vcov, floor_eigenvalues, hc0_vcov, ClusteredVcov};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::frame::FrameError;
use linalg::BlockModel;

#[derive(Debug, Error)]
pub enum EconometricsError {
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} is not numeric")]
    NonNumeric(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("only {0} usable rows")]
    TooFewRows(usize),
    #[error("no identifiable covariate remains in the design")]
    RankDeficient,
    #[error("no convergence after {iterations} iterations (max |score| = {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("perfect separation: fitted probabilities reach 0 or 1")]
    PerfectSeparation,
    #[error("information matrix is numerically singular")]
    Singular,
    #[error("clustering by {factor} gives {clusters} cluster(s); at least 2 are needed")]
    TooFewClusters { factor: String, clusters: usize },
    #[error("variable {0:?} does not enter the model")]
    UnknownVariable(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl EconometricsError {
    /// Estimation failures as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            EconometricsError::NonConvergence { .. }
                | EconometricsError::PerfectSeparation
                | EconometricsError::Singular
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub theta: ThetaMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            theta: ThetaMode::Estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    /// `None` when the term is collinear with earlier columns.
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeEstimate {
    pub factor: String,
    pub level: String,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    /// `None` in the Poisson limit.
    pub theta: Option<f64>,
    pub std_error: Option<f64>,
    pub estimated: bool,
    pub poisson_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub spec: RegressionSpec,
    pub coefficients: Vec<Coefficient>,
    /// Row and column labels of `vcov`.
    pub vcov_terms: Vec<String>,
    pub vcov: Vec<Vec<f64>>,
    pub vcov_type: String,
    pub vcov_floored: bool,
    pub cluster_counts: Vec<usize>,
    /// Reference distribution of the test statistics.
    pub inference: String,
    pub fixed_effects: Vec<FeEstimate>,
    pub log_likelihood: Option<f64>,
    pub null_log_likelihood: Option<f64>,
    pub pseudo_r2: Option<f64>,
    pub pseudo_r2_kind: Option<String>,
    pub r_squared: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub n_params: usize,
    pub n_input: usize,
    pub n_used: usize,
    pub n_dropped_missing: usize,
    pub n_dropped_separation: usize,
    pub dispersion: Option<Dispersion>,
    pub sigma: Option<f64>,
    pub response_mean: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted means on the estimation rows.
    #[serde(skip)]
    pub fitted: Vec<f64>,
    /// Positions of the estimation rows in the input frame.
    #[serde(skip)]
    pub rows: Vec<usize>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).and_then(|c| c.estimate)
    }

    pub fn vcov_matrix(&self) -> Array2<f64> {
        let k = self.vcov_terms.len();
        Array2::from_shape_fn((k, k), |(i, j)| self.vcov[i][j])
    }
}

pub fn stars(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 0.01 => "***".into(),
        Some(p) if p < 0.05 => "**".into(),
        Some(p) if p < 0.1 => "*".into(),
        _ => String::new(),
    }
}

/// Two-sided p-value under `N(0,1)` or Student-t with `df` degrees of freedom.
pub fn p_value(stat: f64, df: Option<f64>) -> Option<f64> {
    if !stat.is_finite() {
        return None;
    }
    let tail = match df {
        Some(d) if d > 0.0 => StudentsT::new(0.0, 1.0, d).ok()?.cdf(-stat.abs()),
        Some(_) => return None,
        None => Normal::new(0.0, 1.0).ok()?.cdf(-stat.abs()),
    };
    Some(2.0 * tail)
}

/// Builds the design from `frame` and fits it.
pub fn fit(
    frame: &crate::frame::Frame,
    spec: &RegressionSpec,
    options: &FitOptions,
) -> Result<FitResult, EconometricsError> {
    let design = build_design(frame, spec)?;
    fit_design(&design, options)
}

fn intercept_only(design: &Design) -> Design {
    Design {
        spec: RegressionSpec::new(design.spec.family, &design.spec.response),
        terms: vec![Term::intercept()],
        x: Array2::ones((design.n(), 1)),
        y: design.y.clone(),
        fe: vec![],
        clusters: vec![],
        rows: design.rows.clone(),
        n_input: design.n(),
        n_dropped_missing: 0,
        n_dropped_separation: 0,
    }
}

pub fn fit_design(design: &Design, options: &FitOptions) -> Result<FitResult, EconometricsError> {
    let family = design.spec.family;
    let model = BlockModel::new(design);
    let covariate_active = (1..design.terms.len()).any(|j| model.pos[j].is_some());
    if !covariate_active && design.terms.len() > 1 {
        return Err(EconometricsError::RankDeficient);
    }
    let n = design.n();
    let y = &design.y;

    let (sol, dispersion) = match family {
        Family::Logistic => (glm::fit_logistic(&model, y)?, None),
        Family::Gaussian => (glm::fit_gaussian(&model, y)?, None),
        Family::Negbin => {
            let nb = glm::fit_negbin(&model, y, options.theta)?;
            let disp = Dispersion {
                theta: nb.theta,
                std_error: nb.theta_se,
                estimated: options.theta == ThetaMode::Estimate,
                poisson_limit: nb.poisson_limit || options.theta == ThetaMode::Infinite,
            };
            (nb.sol, Some(disp))
        }
    };

    let bread = chol_inverse(&sol.schur_chol);

    // reported terms: active dense columns
    let reported: Vec<(usize, usize)> = (0..design.terms.len())
        .filter_map(|j| model.pos[j].map(|a| (j, a)))
        .collect();
    let k = reported.len();
    let p_total = model.p() + model.n_absorbed;

    let ssr: f64 = sol.u.iter().map(|r| r * r).sum();
    let sigma2 = (family == Family::Gaussian && n > p_total).then(|| ssr / (n - p_total) as f64);

    let (vmat, vcov_type, floored, cluster_counts, df) = if design.clusters.is_empty() {
        let scale = match family {
            Family::Gaussian => sigma2.unwrap_or(f64::NAN),
            _ => 1.0,
        };
        let v = Array2::from_shape_fn((k, k), |(i, j)| bread[(reported[i].1, reported[j].1)] * scale);
        let df = (family == Family::Gaussian).then_some(n as f64 - p_total as f64);
        (v, "classical".to_string(), false, vec![], df)
    } else {
        // influence of each row on the reported coefficients
        let mut psi = Array2::zeros((n, k));
        for r in 0..n {
            let xt = model.partialled_row(&sol.normal, r);
            let ur = sol.u[r];
            for (i, &(_, a)) in reported.iter().enumerate() {
                let mut s = 0.0;
                for b in 0..model.p() {
                    s += bread[(a, b)] * xt[b];
                }
                psi[(r, i)] = s * ur;
            }
        }
        let dims: Vec<(&str, &[u32])> = design
            .clusters
            .iter()
            .map(|c| (c.name.as_str(), c.ids.as_slice()))
            .collect();
        let cv = clustered_vcov(&psi, &dims)?;
        let g_min = *cv.cluster_counts.iter().min().unwrap();
        let names: Vec<&str> = design.clusters.iter().map(|c| c.name.as_str()).collect();
        (
            cv.matrix,
            format!("cluster({})", names.join(", ")),
            cv.floored,
            cv.cluster_counts,
            Some(g_min as f64 - 1.0),
        )
    };
    let inference = match df {
        Some(d) => format!("t({d})"),
        None => "normal".to_string(),
    };

    let mut coefficients = Vec::with_capacity(design.terms.len());
    for (j, t) in design.terms.iter().enumerate() {
        let idx = reported.iter().position(|&(jj, _)| jj == j);
        let (estimate, se) = match idx {
            Some(i) => {
                let v = vmat[(i, i)];
                (
                    Some(sol.beta2[reported[i].1]),
                    (v.is_finite() && v >= 0.0).then(|| v.sqrt()),
                )
            }
            None => (None, None),
        };
        let statistic = match (estimate, se) {
            (Some(b), Some(s)) if s > 0.0 => Some(b / s),
            _ => None,
        };
        let p = statistic.and_then(|z| p_value(z, df));
        coefficients.push(Coefficient {
            name: t.name.clone(),
            estimate,
            std_error: se,
            statistic,
            p_value: p,
            stars: stars(p),
        });
    }

    let mut fixed_effects = Vec::new();
    for (f, fac) in design.fe.iter().enumerate() {
        let absorbed = model.absorbed_factor == Some(f);
        for (l, level) in fac.levels.iter().enumerate() {
            let estimate = if l == 0 {
                0.0
            } else if absorbed {
                sol.beta1[l - 1]
            } else {
                let col = model.q + model.block_fe.iter().position(|&b| b == (f, l as u32)).unwrap();
                model.pos[col].map_or(0.0, |a| sol.beta2[a])
            };
            fixed_effects.push(FeEstimate {
                factor: fac.name.clone(),
                level: level.clone(),
                estimate,
            });
        }
    }

    let response_mean = y.iter().sum::<f64>() / n as f64;
    let (ll, null_ll, r_squared) = match family {
        Family::Logistic => {
            let m = response_mean;
            let l0 = if m > 0.0 && m < 1.0 {
                n as f64 * (m * m.ln() + (1.0 - m) * (1.0 - m).ln())
            } else {
                0.0
            };
            (Some(sol.ll), Some(l0), None)
        }
        Family::Negbin => {
            let null = intercept_only(design);
            let nm = BlockModel::new(&null);
            let l0 = glm::fit_negbin(&nm, y, options.theta).ok().map(|s| s.sol.ll);
            (Some(sol.ll), l0, None)
        }
        Family::Gaussian => {
            let sst: f64 = y.iter().map(|v| (v - response_mean).powi(2)).sum();
            let gll = |s: f64| (s > 0.0).then(|| -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * s / n as f64).ln() + 1.0));
            let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
            (gll(ssr), gll(sst), Some(r2))
        }
    };
    let pseudo_r2 = match (family, ll, null_ll) {
        (Family::Gaussian, _, _) => None,
        (_, Some(l), Some(l0)) if l0 != 0.0 => Some(1.0 - l / l0),
        _ => None,
    };
    let extra = match (&dispersion, family) {
        (Some(d), _) if d.estimated && d.theta.is_some() => 1,
        (_, Family::Gaussian) => 1,
        _ => 0,
    };
    let n_params = p_total + extra;
    let aic = ll.map(|l| 2.0 * n_params as f64 - 2.0 * l);
    let bic = ll.map(|l| n_params as f64 * (n as f64).ln() - 2.0 * l);

    let fitted = match family {
        Family::Logistic => sol.eta.iter().map(|&e| sigmoid(e)).collect(),
        Family::Negbin => sol.eta.iter().map(|&e| e.exp()).collect(),
        Family::Gaussian => sol.eta.clone(),
    };

    Ok(FitResult {
        family,
        spec: design.spec.clone(),
        coefficients,
        vcov_terms: reported.iter().map(|&(j, _)| design.terms[j].name.clone()).collect(),
        vcov: (0..k).map(|i| (0..k).map(|j| vmat[(i, j)]).collect()).collect(),
        vcov_type,
        vcov_floored: floored,
        cluster_counts,
        inference,
        fixed_effects,
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        pseudo_r2,
        pseudo_r2_kind: (family != Family::Gaussian).then(|| "mcfadden".to_string()),
        r_squared,
        aic,
        bic,
        n_params,
        n_input: design.n_input,
        n_used: n,
        n_dropped_missing: design.n_dropped_missing,
        n_dropped_separation: design.n_dropped_separation,
        dispersion,
        sigma: sigma2.map(f64::sqrt),
        response_mean,
        iterations: sol.iterations,
        converged: sol.converged,
        fitted,
        rows: design.rows.clone(),
    })
}

#[cfg(test)]
mod tests;
