//! Average marginal effects by re-prediction.
//!
//! The design is rebuilt from the frame, so a fit read back from JSON works
//! as well as a fresh one. Fixed effects are held at their estimates and the
//! delta-method standard error uses only the covariance of the reported
//! coefficients.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::design::{build_design, Term};
use super::glm::sigmoid;
use super::spec::{Family, Transform};
use super::{EconometricsError, FitResult};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmeKind {
    /// `v = 1` against `v = 0`.
    Binary01,
    /// `v + sd(v)` against `v`.
    SdIncrease,
    /// `v + 1` against `v`.
    Unit,
}

impl FromStr for AmeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary01" => Ok(AmeKind::Binary01),
            "sd_increase" => Ok(AmeKind::SdIncrease),
            "unit" => Ok(AmeKind::Unit),
            _ => Err(format!("unknown marginal-effect kind {s:?}")),
        }
    }
}

impl fmt::Display for AmeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AmeKind::Binary01 => "binary01",
            AmeKind::SdIncrease => "sd_increase",
            AmeKind::Unit => "unit",
        })
    }
}

/// Change applied to a raw count before its transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountDelta {
    PlusOne,
    PlusOnePercent,
}

impl CountDelta {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            CountDelta::PlusOne => x + 1.0,
            CountDelta::PlusOnePercent => x * 1.01,
        }
    }
}

impl FromStr for CountDelta {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "+1" | "plus_one" => Ok(CountDelta::PlusOne),
            "+1%" | "plus_one_percent" => Ok(CountDelta::PlusOnePercent),
            _ => Err(format!("unknown count delta {s:?}")),
        }
    }
}

impl fmt::Display for CountDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountDelta::PlusOne => "+1",
            CountDelta::PlusOnePercent => "+1%",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffect {
    pub variable: String,
    pub contrast: String,
    /// On the response scale (probability, expected count or level).
    pub effect: f64,
    pub std_error: Option<f64>,
    /// `100 * effect` for the logistic family.
    pub percentage_points: Option<f64>,
    pub percentage_points_se: Option<f64>,
    /// Size of the perturbation for `sd_increase`.
    pub step: Option<f64>,
    pub n: usize,
}

/// Mean response and its derivative in the linear predictor.
fn response(family: Family, eta: f64) -> (f64, f64) {
    match family {
        Family::Logistic => {
            let p = sigmoid(eta);
            (p, p * (1.0 - p))
        }
        Family::Negbin => {
            let m = eta.min(700.0).exp();
            (m, m)
        }
        Family::Gaussian => (eta, 1.0),
    }
}

/// Average of `g(x_r(hi)) - g(x_r(lo))` over the estimation rows.
fn contrast(
    fit: &FitResult,
    frame: &Frame,
    var: &str,
    contrast_name: String,
    step: Option<f64>,
    hi: &dyn Fn(f64) -> f64,
    lo: &dyn Fn(f64) -> f64,
) -> Result<MarginalEffect, EconometricsError> {
    let design = build_design(frame, &fit.spec)?;
    let source = frame
        .num(var)
        .ok_or_else(|| EconometricsError::UnknownVariable(var.into()))?;

    let coef: HashMap<&str, f64> = fit
        .coefficients
        .iter()
        .filter_map(|c| c.estimate.map(|b| (c.name.as_str(), b)))
        .collect();
    let vpos: HashMap<&str, usize> = fit
        .vcov_terms
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let fe: HashMap<(&str, &str), f64> = fit
        .fixed_effects
        .iter()
        .map(|e| ((e.factor.as_str(), e.level.as_str()), e.estimate))
        .collect();
    // (column of x, term, coefficient, position in vcov, reads `var`)
    let active: Vec<(usize, &Term, f64, Option<usize>, bool)> = design
        .terms
        .iter()
        .enumerate()
        .filter_map(|(j, t)| {
            coef.get(t.name.as_str())
                .map(|&b| (j, t, b, vpos.get(t.name.as_str()).copied(), t.uses(var)))
        })
        .collect();
    let level_offsets: Vec<Vec<f64>> = design
        .fe
        .iter()
        .map(|fac| {
            fac.levels
                .iter()
                .map(|l| fe.get(&(fac.name.as_str(), l.as_str())).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();

    let k = fit.vcov_terms.len();
    let n = design.n();
    let mut total = 0.0;
    let mut grad = vec![0.0; k];
    let mut xs = vec![0.0; active.len()];
    for (i, &row) in design.rows.iter().enumerate() {
        let offset: f64 = design
            .fe
            .iter()
            .zip(&level_offsets)
            .map(|(fac, off)| off[fac.codes[i] as usize])
            .sum();
        let raw = source[row];
        let mut eval = |value: f64, sign: f64, grad: &mut [f64]| -> f64 {
            let mut eta = offset;
            for (slot, &(j, t, b, _, reads)) in xs.iter_mut().zip(&active) {
                *slot = if reads {
                    t.evaluate(frame, row, Some((var, value)))
                } else {
                    design.x[(i, j)]
                };
                eta += b * *slot;
            }
            let (g, dg) = response(fit.family, eta);
            for (&(_, _, _, p, _), x) in active.iter().zip(&xs) {
                if let Some(p) = p {
                    grad[p] += sign * dg * x;
                }
            }
            g
        };
        let up = eval(hi(raw), 1.0, &mut grad);
        total += up - eval(lo(raw), -1.0, &mut grad);
    }
    let nf = n as f64;
    let effect = total / nf;
    grad.iter_mut().for_each(|g| *g /= nf);
    let mut var_e = 0.0;
    for a in 0..k {
        for b in 0..k {
            var_e += grad[a] * fit.vcov[a][b] * grad[b];
        }
    }
    let std_error = (var_e.is_finite() && var_e >= 0.0).then(|| var_e.sqrt());
    let logistic = fit.family == Family::Logistic;
    Ok(MarginalEffect {
        variable: var.into(),
        contrast: contrast_name,
        effect,
        std_error,
        percentage_points: logistic.then_some(100.0 * effect),
        percentage_points_se: if logistic { std_error.map(|s| 100.0 * s) } else { None },
        step,
        n,
    })
}

fn uses(fit: &FitResult, var: &str, transform: Option<Transform>) -> bool {
    let in_cov = fit
        .spec
        .covariates
        .iter()
        .any(|c| c.col == var && transform.is_none_or(|t| c.transform == t));
    let in_inter = transform.is_none() && fit.spec.interactions.iter().flatten().any(|c| c == var);
    in_cov || in_inter
}

/// Average marginal effect of covariate source `var`.
pub fn average_marginal_effects(
    fit: &FitResult,
    frame: &Frame,
    var: &str,
    kind: AmeKind,
) -> Result<MarginalEffect, EconometricsError> {
    if !uses(fit, var, None) {
        return Err(EconometricsError::UnknownVariable(var.into()));
    }
    match kind {
        AmeKind::Binary01 => contrast(fit, frame, var, kind.to_string(), None, &|_| 1.0, &|_| 0.0),
        AmeKind::Unit => contrast(fit, frame, var, kind.to_string(), Some(1.0), &|v| v + 1.0, &|v| v),
        AmeKind::SdIncrease => {
            let design = build_design(frame, &fit.spec)?;
            let source = frame
                .num(var)
                .ok_or_else(|| EconometricsError::UnknownVariable(var.into()))?;
            let vals: Vec<f64> = design.rows.iter().map(|&r| source[r]).collect();
            let sd = sample_sd(&vals);
            contrast(fit, frame, var, kind.to_string(), Some(sd), &move |v| v + sd, &|v| v)
        }
    }
}

/// Effect of changing the raw count `var` (entering through `asinh`) by `delta`.
pub fn counterfactual_count_ame(
    fit: &FitResult,
    frame: &Frame,
    var: &str,
    delta: CountDelta,
) -> Result<MarginalEffect, EconometricsError> {
    if !uses(fit, var, Some(Transform::Asinh)) {
        return Err(EconometricsError::UnknownVariable(var.into()));
    }
    contrast(fit, frame, var, delta.to_string(), None, &move |v| delta.apply(v), &|v| v)
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
