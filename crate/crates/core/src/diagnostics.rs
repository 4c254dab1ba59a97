//! Convergence diagnostics for a (candidate) limit point `x*`.
//!
//! Everything here is evaluated at a concrete iterate: optimality residuals
//! of the fixed-point conditions, the restricted Gram and Hessian spectra on
//! `I = supp(x*)`, the concentration condition
//! `lambda_min(A_I^T A_I) / ||A||^2 > q/2` and its step-size window, the
//! asymptotic contraction factor
//! `rho* = sqrt(1 - 2 mu alpha_F + mu^2 L^2) / (1 + lambda mu phi''(e))`
//! with `alpha_F = lambda_min(d^2F/dx_I^2)` and `e = min_{i in I} |x_i*|`,
//! and the RIP thresholds that imply the concentration condition.
//!
//! `rho*` drops the neighbourhood slack terms of the linear-rate argument,
//! so it is an asymptotic estimate, not a certified bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, PowerIteration};
use crate::loss::{Problem, SmoothLoss};
use crate::penalty::PenaltySpec;
use crate::prox::thresholds;
use crate::solver::posteriori_error_bound;

/// Largest support handled by the dense eigen-solver.
pub const MAX_DENSE_SUPPORT: usize = 200;

pub fn support_of(x: &[f64]) -> Vec<usize> {
    (0..x.len()).filter(|i| x[*i] != 0.0).collect()
}

fn min_abs_on(x: &[f64], support: &[usize]) -> f64 {
    support
        .iter()
        .map(|i| x[*i].abs())
        .fold(f64::INFINITY, f64::min)
}

fn check_support(support: &[usize], n: usize) -> Result<()> {
    if support.is_empty() {
        return Err(Error::invalid("support is empty"));
    }
    if support.len() > MAX_DENSE_SUPPORT {
        return Err(Error::Unsupported(format!(
            "support of size {} exceeds the dense limit {MAX_DENSE_SUPPORT}",
            support.len()
        )));
    }
    if let Some(bad) = support.iter().find(|i| **i >= n) {
        return Err(Error::invalid(format!("support index {bad} out of range")));
    }
    Ok(())
}

/// Residuals of the stationarity conditions:
/// `max_{i in I} |[grad F]_i + lambda sign(x_i) phi'(|x_i|)|` and
/// `max_{i not in I} max(0, |[grad F]_i| - tau/mu)`.
pub fn optimality_residual<L: SmoothLoss + ?Sized>(
    x: &[f64],
    loss: &L,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
) -> Result<(f64, f64)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("iterate has non-finite entries"));
    }
    let tau = thresholds(p, lambda, mu)?.tau;
    let g = loss.grad(x)?;
    let (mut on, mut off) = (0.0f64, 0.0f64);
    for (xi, gi) in x.iter().zip(&g) {
        if *xi != 0.0 {
            let r = gi + lambda * p.deriv1_unchecked(xi.abs()).copysign(*xi);
            on = on.max(r.abs());
        } else {
            off = off.max(gi.abs() - tau / mu);
        }
    }
    Ok((on, off))
}

fn eigenvalues_on(m: &Matrix) -> Result<(f64, f64)> {
    let ev = linalg::symmetric_eigenvalues(m)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

/// `lambda_min(A_I^T A_I)` by dense Jacobi.
pub fn restricted_gram_min_eig(a: &Matrix, support: &[usize]) -> Result<f64> {
    check_support(support, a.cols())?;
    Ok(eigenvalues_on(&a.gram(support))?.0)
}

/// Evaluation of the concentration condition and its step-size window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem6Check {
    pub gram_min_eig: f64,
    pub gram_max_eig: f64,
    pub spectral_norm_sq: f64,
    /// `lambda_min(A_I^T A_I) / ||A||^2 - q/2`; positive iff (a) holds.
    pub a_margin: f64,
    pub a_holds: bool,
    /// `q / (2 lambda_min(A_I^T A_I))`.
    pub b_lower: f64,
    /// `1 / ||A||^2`.
    pub b_upper: f64,
    pub b_holds: bool,
    /// `Cond(A_I^T A_I)`, infinite for a singular Gram matrix.
    pub cond: f64,
    pub cond_bound_holds: bool,
}

fn theorem6_from_parts(gmin: f64, gmax: f64, spectral: f64, q: f64, mu: f64) -> Theorem6Check {
    let a_margin = gmin / spectral - q / 2.0;
    let b_lower = if gmin > 0.0 {
        q / (2.0 * gmin)
    } else {
        f64::INFINITY
    };
    let b_upper = 1.0 / spectral;
    let cond = if gmin > 0.0 {
        gmax / gmin
    } else {
        f64::INFINITY
    };
    let check = Theorem6Check {
        gram_min_eig: gmin,
        gram_max_eig: gmax,
        spectral_norm_sq: spectral,
        a_margin,
        a_holds: a_margin > 0.0,
        b_lower,
        b_upper,
        b_holds: b_lower < mu && mu < b_upper,
        cond,
        cond_bound_holds: cond < 2.0 / q,
    };
    // (a) forces Cond < 2/q since lambda_max(A_I^T A_I) <= ||A||^2.
    debug_assert!(!check.a_holds || check.cond_bound_holds || gmax > spectral * (1.0 + 1e-8));
    check
}

/// Concentration condition (a), step window (b) and the condition-number
/// consequence `Cond(A_I^T A_I) < 2/q`.
pub fn check_theorem6(a: &Matrix, support: &[usize], q: f64, mu: f64) -> Result<Theorem6Check> {
    let spectral = linalg::spectral_norm_sq(a, PowerIteration::default())?;
    check_theorem6_with_norm(a, support, q, mu, spectral)
}

/// [`check_theorem6`] with a known `||A||_2^2`.
pub fn check_theorem6_with_norm(
    a: &Matrix,
    support: &[usize],
    q: f64,
    mu: f64,
    spectral_norm_sq: f64,
) -> Result<Theorem6Check> {
    check_support(support, a.cols())?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q", q, "0 < q < 1"));
    }
    if !(mu > 0.0) {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    let (gmin, gmax) = eigenvalues_on(&a.gram(support))?;
    Ok(theorem6_from_parts(gmin, gmax, spectral_norm_sq, q, mu))
}

/// `lambda_min(d^2F/dx_I^2 + lambda diag(phi''(|x_i|)))` on `I = supp(x*)`.
/// Positive means `x*` is a strict local minimiser on its support.
pub fn restricted_hessian_min_eig<L: SmoothLoss + ?Sized>(
    x_star: &[f64],
    loss: &L,
    p: &PenaltySpec,
    lambda: f64,
) -> Result<f64> {
    let support = support_of(x_star);
    check_support(&support, x_star.len())?;
    let mut h = loss.restricted_hessian(x_star, &support)?;
    for (k, i) in support.iter().enumerate() {
        let v = h.get(k, k) + lambda * p.deriv2(x_star[*i].abs())?;
        h.set(k, k, v);
    }
    Ok(eigenvalues_on(&h)?.0)
}

/// `-lambda_min(d^2F/dx_I^2) / phi''(e)`: regularisation strengths below
/// this keep the restricted Hessian positive definite.
pub fn lambda_bound<L: SmoothLoss + ?Sized>(
    x_star: &[f64],
    loss: &L,
    p: &PenaltySpec,
) -> Result<f64> {
    let support = support_of(x_star);
    check_support(&support, x_star.len())?;
    let alpha_f = eigenvalues_on(&loss.restricted_hessian(x_star, &support)?)?.0;
    Ok(-alpha_f / p.deriv2(min_abs_on(x_star, &support))?)
}

/// `sqrt(max(0, 1 - 2 mu alpha_f + mu^2 L^2)) / (1 + lambda mu phi''(e))`,
/// or `None` when the denominator is not positive. The value is returned
/// as is, including `0` and values `>= 1`.
pub fn contraction_factor_formula(
    alpha_f: f64,
    lipschitz: f64,
    mu: f64,
    lambda: f64,
    phi2_at_e: f64,
) -> Option<f64> {
    let den = 1.0 + lambda * mu * phi2_at_e;
    if !(den > 0.0) {
        return None;
    }
    let num = (1.0 - 2.0 * mu * alpha_f + mu * mu * lipschitz * lipschitz)
        .max(0.0)
        .sqrt();
    Some(num / den)
}

/// Asymptotic contraction factor at `x*`, present only when it lies in
/// `(0, 1)`.
pub fn contraction_factor<L: SmoothLoss + ?Sized>(
    x_star: &[f64],
    loss: &L,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
) -> Result<Option<f64>> {
    let support = support_of(x_star);
    if support.is_empty() || support.len() > MAX_DENSE_SUPPORT {
        return Ok(None);
    }
    let alpha_f = eigenvalues_on(&loss.restricted_hessian(x_star, &support)?)?.0;
    let e = min_abs_on(x_star, &support);
    let rho = contraction_factor_formula(alpha_f, loss.lipschitz()?, mu, lambda, p.deriv2(e)?);
    Ok(rho.filter(|r| *r > 0.0 && *r < 1.0))
}

/// Largest violation of `||grad_I T(z^{n+1})|| <= (1/mu + L) ||z^{n+1} - z^n||`
/// over consecutive iterates of `window`, all on one support `I`, where
/// `grad_I T(z) = [grad F(z)]_I + lambda sign(z_I) phi'(|z_I|)`.
pub fn relative_error_check<L: SmoothLoss + ?Sized>(
    window: &[Vec<f64>],
    loss: &L,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::invalid(
            "relative-error check needs at least two iterates",
        ));
    }
    let support = support_of(&window[0]);
    if let Some(k) = window.iter().position(|w| support_of(w) != support) {
        return Err(Error::invalid(format!(
            "support changes at window position {k}"
        )));
    }
    let factor = 1.0 / mu + loss.lipschitz()?;
    let mut worst = f64::NEG_INFINITY;
    for pair in window.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let g = loss.grad(next)?;
        let grad_t: f64 = support
            .iter()
            .map(|i| {
                let r = g[*i] + lambda * p.deriv1_unchecked(next[*i].abs()).copysign(next[*i]);
                r * r
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(grad_t - factor * linalg::dist2(next, prev));
    }
    Ok(worst)
}

/// RIP constants sufficient for the concentration condition:
/// `delta_K < (2-q)/(2 + 2qN/K)` or `delta_2K < (2-q)/(2 + qN/K)`.
pub fn rip_sufficient_bounds(q: f64, k: usize, n: usize) -> Result<(f64, f64)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q", q, "0 < q < 1"));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::domain("sparsity K", k as f64, "0 < K < N/2"));
    }
    let ratio = n as f64 / k as f64;
    Ok((
        (2.0 - q) / (2.0 + 2.0 * q * ratio),
        (2.0 - q) / (2.0 + q * ratio),
    ))
}

/// Everything [`diagnose`] knows about a candidate solution. Fields that
/// need a non-empty support are absent otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub lambda: f64,
    pub mu: f64,
    pub q: f64,
    pub eta: f64,
    pub tau: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub spectral_norm_sq: f64,
    pub support: Vec<usize>,
    pub e_min: Option<f64>,
    pub gram_min_eig: Option<f64>,
    pub gram_max_eig: Option<f64>,
    pub gram_cond: Option<f64>,
    pub thm6_a_holds: Option<bool>,
    pub thm6_a_margin: Option<f64>,
    pub thm6_b_holds: Option<bool>,
    pub thm6_b_lower: Option<f64>,
    pub thm6_b_upper: Option<f64>,
    pub thm6_cond_bound_holds: Option<bool>,
    pub restricted_hessian_min_eig: Option<f64>,
    pub lambda_bound: Option<f64>,
    pub rho_star: Option<f64>,
    /// Always "asymptotic": slack terms are evaluated at their limit.
    pub rho_star_kind: &'static str,
    pub posteriori_bound: Option<f64>,
    pub optimality_residual_support: f64,
    pub optimality_residual_offsupport: f64,
}

/// Full report for `x` on a least-squares or logistic problem.
pub fn diagnose(
    x: &[f64],
    prob: &Problem,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
    last_step_norm: Option<f64>,
) -> Result<DiagnosticsReport> {
    if x.len() != prob.cols() {
        return Err(Error::DimensionMismatch {
            what: "solution vector",
            expected: prob.cols(),
            got: x.len(),
        });
    }
    let pair = thresholds(p, lambda, mu)?;
    let lipschitz = prob.lipschitz()?;
    let spectral = prob.spectral_norm_sq()?;
    let (res_on, res_off) = optimality_residual(x, prob, p, lambda, mu)?;
    let support = support_of(x);

    let mut report = DiagnosticsReport {
        lambda,
        mu,
        q: p.q(),
        eta: pair.eta,
        tau: pair.tau,
        lipschitz,
        spectral_norm_sq: spectral,
        support: support.clone(),
        e_min: None,
        gram_min_eig: None,
        gram_max_eig: None,
        gram_cond: None,
        thm6_a_holds: None,
        thm6_a_margin: None,
        thm6_b_holds: None,
        thm6_b_lower: None,
        thm6_b_upper: None,
        thm6_cond_bound_holds: None,
        restricted_hessian_min_eig: None,
        lambda_bound: None,
        rho_star: None,
        rho_star_kind: "asymptotic",
        posteriori_bound: None,
        optimality_residual_support: res_on,
        optimality_residual_offsupport: res_off,
    };
    if support.is_empty() || support.len() > MAX_DENSE_SUPPORT {
        return Ok(report);
    }

    let e = min_abs_on(x, &support);
    report.e_min = Some(e);
    let t6 = check_theorem6_with_norm(prob.matrix(), &support, p.q(), mu, spectral)?;
    report.gram_min_eig = Some(t6.gram_min_eig);
    report.gram_max_eig = Some(t6.gram_max_eig);
    report.gram_cond = t6.cond.is_finite().then_some(t6.cond);
    report.thm6_a_holds = Some(t6.a_holds);
    report.thm6_a_margin = Some(t6.a_margin);
    report.thm6_b_holds = Some(t6.b_holds);
    report.thm6_b_lower = Some(t6.b_lower);
    report.thm6_b_upper = Some(t6.b_upper);
    report.thm6_cond_bound_holds = Some(t6.cond_bound_holds);

    let phi2 = p.deriv2(e)?;
    let alpha_f = eigenvalues_on(&prob.restricted_hessian(x, &support)?)?.0;
    report.restricted_hessian_min_eig = Some(restricted_hessian_min_eig(x, prob, p, lambda)?);
    report.lambda_bound = Some(-alpha_f / phi2);
    report.rho_star = contraction_factor_formula(alpha_f, lipschitz, mu, lambda, phi2)
        .filter(|r| *r > 0.0 && *r < 1.0);
    if let (Some(rho), Some(step)) = (report.rho_star, last_step_norm) {
        report.posteriori_bound = Some(posteriori_error_bound(rho, step)?);
    }
    Ok(report)
}
