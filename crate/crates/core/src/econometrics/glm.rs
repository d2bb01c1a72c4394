//! Likelihoods and Newton-type solvers for the three families.

use ndarray::{Array1, Array2};
use statrs::function::gamma::{digamma, ln_gamma};

use super::linalg::{BlockModel, Normal};
use super::EconometricsError;

pub const SCORE_TOL: f64 = 1e-8;
pub const REL_LL_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 100;
/// Dispersion beyond this is treated as the Poisson limit.
pub const THETA_MAX: f64 = 1e6;
const EXACT_SUM_LIMIT: f64 = 2000.0;
const ETA_MAX: f64 = 700.0;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_row_ll(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

/// `ln Γ(y+θ) - ln Γ(θ)`.
fn lgamma_ratio(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        (0..y as u32).map(|j| (theta + j as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// `ψ(y+θ) - ψ(θ)`.
fn digamma_diff(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        (0..y as u32).map(|j| 1.0 / (theta + j as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

/// `ψ'(y+θ) - ψ'(θ)`.
fn trigamma_diff(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        -(0..y as u32)
            .map(|j| {
                let v = theta + j as f64;
                1.0 / (v * v)
            })
            .sum::<f64>()
    } else {
        trigamma(y + theta) - trigamma(theta)
    }
}

fn ln_factorial(y: f64) -> f64 {
    ln_gamma(y + 1.0)
}

/// NB2 log-density with mean `exp(eta)` and dispersion `theta`.
pub fn negbin_row_ll(y: f64, eta: f64, theta: f64) -> f64 {
    let eta = eta.min(ETA_MAX);
    let mu = eta.exp();
    // ln(θ/(θ+μ)) and ln(μ/(θ+μ)) without cancellation
    let ln_tp = (theta + mu).ln();
    lgamma_ratio(y, theta) - ln_factorial(y) + theta * (theta.ln() - ln_tp) + y * (eta - ln_tp)
}

pub fn poisson_row_ll(y: f64, eta: f64) -> f64 {
    let eta = eta.min(ETA_MAX);
    y * eta - eta.exp() - ln_factorial(y)
}

/// Log-likelihood and gradient of a plain logistic model `y ~ X b`.
pub fn logistic_loglik(x: &Array2<f64>, y: &[f64], beta: &[f64]) -> f64 {
    let eta = x.dot(&Array1::from(beta.to_vec()));
    eta.iter().zip(y).map(|(&e, &yy)| logistic_row_ll(yy, e)).sum()
}

pub fn logistic_gradient(x: &Array2<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let eta = x.dot(&Array1::from(beta.to_vec()));
    let u: Array1<f64> = eta.iter().zip(y).map(|(&e, &yy)| yy - sigmoid(e)).collect();
    x.t().dot(&u).to_vec()
}

pub fn negbin_loglik(x: &Array2<f64>, y: &[f64], beta: &[f64], theta: f64) -> f64 {
    let eta = x.dot(&Array1::from(beta.to_vec()));
    eta.iter()
        .zip(y)
        .map(|(&e, &yy)| negbin_row_ll(yy, e, theta))
        .sum()
}

/// Gradient with respect to `beta` and to `theta`.
pub fn negbin_gradient(x: &Array2<f64>, y: &[f64], beta: &[f64], theta: f64) -> (Vec<f64>, f64) {
    let eta = x.dot(&Array1::from(beta.to_vec()));
    let mu: Vec<f64> = eta.iter().map(|e| e.min(ETA_MAX).exp()).collect();
    let u: Array1<f64> = mu
        .iter()
        .zip(y)
        .map(|(&m, &yy)| (yy - m) * theta / (theta + m))
        .collect();
    let (g, _) = theta_derivatives(y, &mu, theta);
    (x.t().dot(&u).to_vec(), g)
}

/// First and second derivative of the NB log-likelihood in `theta`.
fn theta_derivatives(y: &[f64], mu: &[f64], theta: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for (&yy, &m) in y.iter().zip(mu) {
        let tm = theta + m;
        g += digamma_diff(yy, theta) + theta.ln() + 1.0 - tm.ln() - (theta + yy) / tm;
        h += trigamma_diff(yy, theta) + 1.0 / theta - 2.0 / tm + (theta + yy) / (tm * tm);
    }
    (g, h)
}

/// Row contributions used by the Newton solver.
pub(crate) trait RowModel {
    /// Log-likelihood, working weights and score residuals at `eta`.
    fn evaluate(&self, y: &[f64], eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>);
}

pub(crate) struct Logistic;

impl RowModel for Logistic {
    fn evaluate(&self, y: &[f64], eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mut ll = 0.0;
        let mut w = Vec::with_capacity(y.len());
        let mut u = Vec::with_capacity(y.len());
        for (&yy, &e) in y.iter().zip(eta) {
            ll += logistic_row_ll(yy, e);
            let p = sigmoid(e);
            w.push(p * (1.0 - p));
            u.push(yy - p);
        }
        (ll, w, u)
    }
}

pub(crate) struct NegBin {
    /// `None` is the Poisson limit.
    pub theta: Option<f64>,
}

impl RowModel for NegBin {
    fn evaluate(&self, y: &[f64], eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mut ll = 0.0;
        let mut w = Vec::with_capacity(y.len());
        let mut u = Vec::with_capacity(y.len());
        for (&yy, &e) in y.iter().zip(eta) {
            let mu = e.min(ETA_MAX).exp();
            match self.theta {
                Some(t) => {
                    ll += negbin_row_ll(yy, e, t);
                    let f = t / (t + mu);
                    w.push(mu * f);
                    u.push((yy - mu) * f);
                }
                None => {
                    ll += poisson_row_ll(yy, e);
                    w.push(mu);
                    u.push(yy - mu);
                }
            }
        }
        (ll, w, u)
    }
}

pub(crate) struct Gaussian;

impl RowModel for Gaussian {
    fn evaluate(&self, y: &[f64], eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let u: Vec<f64> = y.iter().zip(eta).map(|(a, b)| a - b).collect();
        let ssr: f64 = u.iter().map(|r| r * r).sum();
        (-0.5 * ssr, vec![1.0; y.len()], u)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub beta2: Vec<f64>,
    pub beta1: Vec<f64>,
    pub eta: Vec<f64>,
    pub ll: f64,
    pub u: Vec<f64>,
    pub normal: Normal,
    pub schur_chol: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub by_score: bool,
    pub max_score: f64,
}

fn max_abs(nm: &Normal) -> f64 {
    nm.g1
        .iter()
        .chain(nm.g2.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Damped Newton iterations from the given start.
pub(crate) fn newton(
    model: &BlockModel,
    y: &[f64],
    rows: &dyn RowModel,
    mut beta2: Vec<f64>,
    mut beta1: Vec<f64>,
    max_iter: usize,
) -> Result<Solution, EconometricsError> {
    let mut eta = model.eta(&beta2, &beta1);
    let (mut ll, mut w, mut u) = rows.evaluate(y, &eta);
    let mut converged = false;
    let mut by_score = false;
    let mut iterations = 0;
    let mut nm = model.normal(&w, &u);
    while iterations < max_iter {
        if max_abs(&nm) < SCORE_TOL {
            converged = true;
            by_score = true;
            break;
        }
        iterations += 1;
        let (d2, d1, _) = model.solve(&nm).ok_or(EconometricsError::Singular)?;
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let b2: Vec<f64> = beta2.iter().zip(&d2).map(|(b, d)| b + step * d).collect();
            let b1: Vec<f64> = beta1.iter().zip(&d1).map(|(b, d)| b + step * d).collect();
            let e = model.eta(&b2, &b1);
            let (l, ww, uu) = rows.evaluate(y, &e);
            if l.is_finite() && l >= ll - 1e-12 * ll.abs() {
                accepted = Some((b2, b1, e, l, ww, uu));
                break;
            }
            step *= 0.5;
        }
        let Some((b2, b1, e, l, ww, uu)) = accepted else {
            // no ascent possible in floating point: the current point is the optimum
            converged = true;
            break;
        };
        let rel = (l - ll).abs() / l.abs().max(1e-300);
        beta2 = b2;
        beta1 = b1;
        eta = e;
        ll = l;
        w = ww;
        u = uu;
        nm = model.normal(&w, &u);
        if rel < REL_LL_TOL {
            converged = true;
            by_score = max_abs(&nm) < SCORE_TOL;
            break;
        }
    }
    let schur_chol = super::linalg::cholesky(&model.schur(&nm)).ok_or(EconometricsError::Singular)?;
    let max_score = max_abs(&nm);
    Ok(Solution {
        beta2,
        beta1,
        eta,
        ll,
        u,
        normal: nm,
        schur_chol,
        iterations,
        converged,
        by_score,
        max_score,
    })
}

pub(crate) fn start_values(model: &BlockModel, intercept: f64) -> (Vec<f64>, Vec<f64>) {
    let mut b2 = vec![0.0; model.p()];
    if let Some(a) = model.pos[0] {
        b2[a] = intercept;
    }
    (b2, vec![0.0; model.n_absorbed])
}

pub(crate) fn fit_logistic(model: &BlockModel, y: &[f64]) -> Result<Solution, EconometricsError> {
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let start = (ybar / (1.0 - ybar)).ln();
    let start = if start.is_finite() { start } else { 0.0 };
    let (b2, b1) = start_values(model, start);
    let sol = newton(model, y, &Logistic, b2, b1, MAX_ITER)?;
    let extreme = sol
        .eta
        .iter()
        .map(|&e| sigmoid(e))
        .any(|p| !(1e-10..=1.0 - 1e-10).contains(&p));
    if !sol.converged || (extreme && !sol.by_score) {
        return Err(if extreme {
            EconometricsError::PerfectSeparation
        } else {
            EconometricsError::NonConvergence {
                iterations: sol.iterations,
                gradient_norm: sol.max_score,
            }
        });
    }
    Ok(sol)
}

pub(crate) fn fit_gaussian(model: &BlockModel, y: &[f64]) -> Result<Solution, EconometricsError> {
    let (b2, b1) = start_values(model, 0.0);
    let sol = newton(model, y, &Gaussian, b2, b1, MAX_ITER)?;
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    Estimate,
    Fixed(f64),
    /// Poisson.
    Infinite,
}

#[derive(Debug, Clone)]
pub(crate) struct NegBinSolution {
    pub sol: Solution,
    pub theta: Option<f64>,
    pub theta_se: Option<f64>,
    pub poisson_limit: bool,
}

/// Newton in `ln θ` with `μ` held fixed.
fn update_theta(y: &[f64], mu: &[f64], theta: f64) -> f64 {
    let ll = |t: f64| -> f64 {
        y.iter()
            .zip(mu)
            .map(|(&yy, &m)| negbin_row_ll(yy, m.ln(), t))
            .sum()
    };
    let mut phi = theta.ln();
    let mut cur = ll(theta);
    for _ in 0..100 {
        let t = phi.exp();
        if t > THETA_MAX {
            break;
        }
        let (g, h) = theta_derivatives(y, mu, t);
        let gp = t * g;
        let hp = t * t * h + t * g;
        if gp.abs() < SCORE_TOL {
            break;
        }
        let mut step = if hp < 0.0 { -gp / hp } else { gp.signum() };
        step = step.clamp(-2.0, 2.0);
        let mut moved = false;
        while step.abs() > 1e-14 {
            let cand = phi + step;
            let v = ll(cand.exp());
            if v.is_finite() && v >= cur {
                let rel = (v - cur).abs() / v.abs().max(1e-300);
                phi = cand;
                cur = v;
                moved = rel >= 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    phi.exp()
}

pub(crate) fn fit_negbin(
    model: &BlockModel,
    y: &[f64],
    mode: ThetaMode,
) -> Result<NegBinSolution, EconometricsError> {
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    if ybar.is_nan() || ybar <= 0.0 {
        return Err(EconometricsError::InvalidResponse(
            "negative binomial response is identically zero".into(),
        ));
    }
    let (b2, b1) = start_values(model, ybar.ln());
    let mut theta = match mode {
        ThetaMode::Estimate => Some(1.0),
        ThetaMode::Fixed(t) => Some(t),
        ThetaMode::Infinite => None,
    };
    let mut poisson_limit = false;
    let mut sol = newton(model, y, &NegBin { theta }, b2, b1, MAX_ITER)?;
    if mode == ThetaMode::Estimate {
        let mut outer = 0;
        loop {
            outer += 1;
            let mu: Vec<f64> = sol.eta.iter().map(|e| e.min(ETA_MAX).exp()).collect();
            let t_new = update_theta(y, &mu, theta.unwrap());
            if t_new > THETA_MAX {
                poisson_limit = true;
                theta = None;
                sol = newton(model, y, &NegBin { theta }, sol.beta2, sol.beta1, MAX_ITER)?;
                break;
            }
            let t_old = theta.unwrap();
            theta = Some(t_new);
            let prev_ll = sol.ll;
            sol = newton(model, y, &NegBin { theta }, sol.beta2, sol.beta1, MAX_ITER)?;
            let rel = (sol.ll - prev_ll).abs() / sol.ll.abs().max(1e-300);
            if rel < REL_LL_TOL && (t_new - t_old).abs() <= 1e-8 * t_old {
                break;
            }
            if outer >= MAX_ITER {
                return Err(EconometricsError::NonConvergence {
                    iterations: outer,
                    gradient_norm: sol.max_score,
                });
            }
        }
    }
    if !sol.converged {
        return Err(EconometricsError::NonConvergence {
            iterations: sol.iterations,
            gradient_norm: sol.max_score,
        });
    }
    let theta_se = match (mode, theta) {
        (ThetaMode::Estimate, Some(t)) => {
            let mu: Vec<f64> = sol.eta.iter().map(|e| e.min(ETA_MAX).exp()).collect();
            let (_, h) = theta_derivatives(y, &mu, t);
            (h < 0.0).then(|| (-1.0 / h).sqrt())
        }
        _ => None,
    };
    Ok(NegBinSolution {
        sol,
        theta,
        theta_se,
        poisson_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_matches_known_values() {
        // ψ'(1) = π²/6
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-12);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_sums_agree_with_special_functions() {
        for &(y, t) in &[(3.0, 0.7), (17.0, 2.5), (250.0, 11.0)] {
            assert!((lgamma_ratio(y, t) - (ln_gamma(y + t) - ln_gamma(t))).abs() < 1e-9);
            assert!((digamma_diff(y, t) - (digamma(y + t) - digamma(t))).abs() < 1e-9);
            assert!((trigamma_diff(y, t) - (trigamma(y + t) - trigamma(t))).abs() < 1e-9);
        }
    }

    #[test]
    fn negbin_density_sums_to_one() {
        let (eta, theta) = (1.2f64, 1.7);
        let s: f64 = (0..400).map(|y| negbin_row_ll(y as f64, eta, theta).exp()).sum();
        assert!((s - 1.0).abs() < 1e-10);
        let s: f64 = (0..100).map(|y| poisson_row_ll(y as f64, eta).exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((logistic_row_ll(1.0, 800.0)).abs() < 1e-12);
        assert!((logistic_row_ll(0.0, -800.0)).abs() < 1e-12);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
