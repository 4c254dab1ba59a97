//! The iterative jumping thresholding (IJT) loop
//! `x <- Prox_{mu, lambda Phi}(x - mu grad F(x))` with stopping rules,
//! per-iteration tracing and optional in-loop verification of the descent
//! and step identities.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{self, norm2};
use crate::loss::SmoothLoss;
use crate::penalty::PenaltySpec;
use crate::prox::{prox_hard, prox_soft, JumpThreshold, ThresholdPair};

/// Objective growth factor (relative to the initial objective) treated as
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    /// `mu` as given.
    Absolute(f64),
    /// `mu = frac / L`, `0 < frac < 1`.
    FractionOfInverseLipschitz(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Zero,
    Vector(Vec<f64>),
    /// Minimiser of `1/2 ||Ax - y||^2 + lambda_init ||x||_1` with
    /// `lambda_init = 0.01 ||A^T y||_inf` (least squares only).
    L1Solution,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub lambda: f64,
    pub step: StepSize,
    pub init: Init,
    /// Stop when `||x^{n+1} - x^n|| / ||x^{n+1}|| <= tol_rel_change`.
    pub tol_rel_change: f64,
    pub max_iters: usize,
    /// Stop early once the a-posteriori error bound drops below this.
    pub stop_on_posteriori: Option<f64>,
    /// Evaluate the sufficient-decrease and step identities every iteration.
    pub verify: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64, step: StepSize) -> Self {
        SolverConfig {
            lambda,
            step,
            init: Init::Zero,
            tol_rel_change: 1e-10,
            max_iters: 100_000,
            stop_on_posteriori: None,
            verify: false,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_rel_change = tol;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_verify(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn with_posteriori_target(mut self, target: Option<f64>) -> Self {
        self.stop_on_posteriori = target;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain("lambda", self.lambda, "finite lambda > 0"));
        }
        match self.step {
            StepSize::Absolute(mu) if !(mu > 0.0 && mu.is_finite()) => {
                return Err(Error::domain("mu", mu, "finite mu > 0"))
            }
            StepSize::FractionOfInverseLipschitz(f) if !(f > 0.0 && f < 1.0) => {
                return Err(Error::domain("mu_frac", f, "0 < mu_frac < 1"))
            }
            _ => {}
        }
        if !(self.tol_rel_change >= 0.0) {
            return Err(Error::domain("tol_rel_change", self.tol_rel_change, ">= 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }

    /// The concrete step size for a loss with Lipschitz constant `lipschitz`.
    pub fn resolve_mu(&self, lipschitz: f64) -> Result<f64> {
        match self.step {
            StepSize::Absolute(mu) => Ok(mu),
            StepSize::FractionOfInverseLipschitz(f) => {
                if lipschitz > 0.0 {
                    Ok(f / lipschitz)
                } else {
                    Err(Error::domain(
                        "Lipschitz constant",
                        lipschitz,
                        "L > 0 for a relative step size",
                    ))
                }
            }
        }
    }
}

/// The thresholding rule applied after each gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholding {
    /// Proximity map of `lambda phi(|.|)`; this is IJT.
    Jump(PenaltySpec),
    /// `lambda ||x||_1` (iterative soft thresholding).
    Soft,
    /// `lambda ||x||_0` (iterative hard thresholding).
    Hard,
}

impl Thresholding {
    pub fn name(&self) -> &'static str {
        match self {
            Thresholding::Jump(_) => "ijt",
            Thresholding::Soft => "soft",
            Thresholding::Hard => "hard",
        }
    }
}

enum Operator {
    Jump(JumpThreshold),
    Soft { threshold: f64 },
    Hard { lambda_mu: f64 },
}

impl Operator {
    fn new(rule: Thresholding, lambda: f64, mu: f64) -> Result<Self> {
        Ok(match rule {
            Thresholding::Jump(p) => Operator::Jump(JumpThreshold::new(p, lambda, mu)?),
            Thresholding::Soft => Operator::Soft {
                threshold: lambda * mu,
            },
            Thresholding::Hard => Operator::Hard {
                lambda_mu: lambda * mu,
            },
        })
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Operator::Jump(op) => {
                for (i, (o, zi)) in out.iter_mut().zip(z).enumerate() {
                    *o = op.apply(*zi).map_err(|e| Error::at(i, e))?;
                }
            }
            Operator::Soft { threshold } => out
                .iter_mut()
                .zip(z)
                .for_each(|(o, zi)| *o = prox_soft(*threshold, *zi)),
            Operator::Hard { lambda_mu } => out
                .iter_mut()
                .zip(z)
                .for_each(|(o, zi)| *o = prox_hard(*lambda_mu, *zi)),
        }
        Ok(())
    }

    /// The non-smooth part of the objective, without the `lambda` factor.
    fn penalty(&self, x: &[f64]) -> f64 {
        match self {
            Operator::Jump(op) => op.penalty().total(x),
            Operator::Soft { .. } => x.iter().map(|v| v.abs()).sum(),
            Operator::Hard { .. } => x.iter().filter(|v| **v != 0.0).count() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

/// Support and sign pattern of an iterate, stored only at the iterations
/// where it changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPattern {
    pub iter: usize,
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SupportPattern {
    fn of(iter: usize, x: &[f64]) -> Self {
        let mut support = Vec::new();
        let mut signs = Vec::new();
        for (i, v) in x.iter().enumerate() {
            if *v != 0.0 {
                support.push(i);
                signs.push(if *v > 0.0 { 1 } else { -1 });
            }
        }
        SupportPattern {
            iter,
            support,
            signs,
        }
    }
}

/// Per-iteration record. Entry `k` describes iterate `x^{k+1}`; the
/// initial point `x^0` contributes only `initial_objective` and the first
/// support pattern.
#[derive(Debug, Clone, Default)]
pub struct IterTrace {
    pub initial_objective: f64,
    pub objective: Vec<f64>,
    pub step_norm: Vec<f64>,
    pub support_size: Vec<usize>,
    pub support_changed: Vec<bool>,
    pub sign_changed: Vec<bool>,
    pub wall_time: Vec<f64>,
    /// Change points of the support/sign pattern, starting with `x^0`.
    pub patterns: Vec<SupportPattern>,
}

impl IterTrace {
    pub(crate) fn starting_at(initial_objective: f64, x0: &[f64]) -> Self {
        IterTrace {
            initial_objective,
            patterns: vec![SupportPattern::of(0, x0)],
            ..IterTrace::default()
        }
    }

    /// Appends iterate `x^it`; returns whether its sign pattern changed.
    pub(crate) fn record(
        &mut self,
        it: usize,
        x: &[f64],
        objective: f64,
        step: f64,
        wall: f64,
    ) -> bool {
        let prev = self.patterns.last().expect("initial pattern");
        let pattern = SupportPattern::of(it, x);
        let support_changed = pattern.support != prev.support;
        let sign_changed = support_changed || pattern.signs != prev.signs;
        self.objective.push(objective);
        self.step_norm.push(step);
        self.support_size.push(pattern.support.len());
        self.support_changed.push(support_changed);
        self.sign_changed.push(sign_changed);
        self.wall_time.push(wall);
        if sign_changed {
            self.patterns.push(pattern);
        }
        sign_changed
    }

    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    /// Support pattern of iterate `x^n` (`n = 0` is the initial point).
    pub fn pattern_at(&self, n: usize) -> &SupportPattern {
        let idx = self.patterns.partition_point(|p| p.iter <= n);
        &self.patterns[idx.saturating_sub(1)]
    }

    /// Dense sign vector `sign(x^n)` with entries in `{-1, 0, 1}`.
    pub fn sign_vector_at(&self, n: usize, dim: usize) -> Vec<i8> {
        let p = self.pattern_at(n);
        let mut s = vec![0i8; dim];
        for (i, sg) in p.support.iter().zip(&p.signs) {
            s[*i] = *sg;
        }
        s
    }

    /// Last iterate index at which the support (or sign pattern) changed;
    /// every later iterate shares it. `0` if it never changed.
    pub fn freeze_iters(&self) -> (usize, usize) {
        let last = |flags: &[bool]| flags.iter().rposition(|c| *c).map_or(0, |k| k + 1);
        (last(&self.support_changed), last(&self.sign_changed))
    }

    /// CSV with columns `iter, objective, step_norm, support_size,
    /// support_changed, sign_changed, wall_time_s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "iter,objective,step_norm,support_size,support_changed,sign_changed,wall_time_s"
        )?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                k + 1,
                fmt_f64(self.objective[k]),
                fmt_f64(self.step_norm[k]),
                self.support_size[k],
                u8::from(self.support_changed[k]),
                u8::from(self.sign_changed[k]),
                fmt_f64(self.wall_time[k]),
            )?;
        }
        Ok(())
    }
}

/// Worst violations of the per-iteration identities seen during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepChecks {
    /// `max_n T(x^{n+1}) - T(x^n) + 1/2 (1/mu - L) ||x^{n+1} - x^n||^2`.
    pub max_descent_violation: f64,
    /// `max |x_i + lambda mu sign(x_i) phi'(|x_i|) - z_i|` over the support
    /// of each iterate, `z` the gradient-step point.
    pub max_step_identity_violation: f64,
    /// `max (|z_i| - tau)` over indices thresholded to zero.
    pub max_offsupport_violation: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub algorithm: &'static str,
    pub x_final: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub trace: IterTrace,
    pub support_freeze_iter: Option<usize>,
    pub sign_freeze_iter: Option<usize>,
    pub lambda: f64,
    pub mu: f64,
    pub lipschitz: f64,
    pub thresholds: Option<ThresholdPair>,
    /// Smallest non-zero magnitude over all iterates after `x^0`.
    pub min_nonzero_magnitude: Option<f64>,
    pub checks: Option<StepChecks>,
    /// The run stopped because the a-posteriori bound met its target.
    pub stopped_by_posteriori: bool,
    /// `mu >= 1/L`: the descent guarantees do not apply.
    pub step_warning: bool,
    pub wall_time: f64,
}

impl SolveResult {
    pub fn final_step_norm(&self) -> Option<f64> {
        self.trace.step_norm.last().copied()
    }
}

fn resolve_init<L: SmoothLoss + ?Sized>(loss: &L, init: &Init) -> Result<Vec<f64>> {
    let n = loss.dim();
    match init {
        Init::Zero => Ok(vec![0.0; n]),
        Init::Vector(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "initial vector",
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("initial vector has non-finite entries"));
            }
            Ok(v.clone())
        }
        Init::L1Solution => {
            let prob = loss.as_least_squares().ok_or_else(|| {
                Error::Unsupported("l1-solution initialisation needs a least-squares loss".into())
            })?;
            let aty = prob.matrix().mul_t_vec(prob.y());
            let lam = 0.01 * linalg::norm_inf(&aty);
            if lam == 0.0 {
                return Ok(vec![0.0; n]);
            }
            Ok(baselines::fista_l1(prob, lam, 1e-8, 50_000)?.x)
        }
    }
}

/// One IJT step `Prox_{mu, lambda Phi}(x - mu grad F(x))`.
pub fn ijt_step<L: SmoothLoss + ?Sized>(
    loss: &L,
    p: &PenaltySpec,
    cfg: &SolverConfig,
    x: &[f64],
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mu = match cfg.step {
        StepSize::Absolute(mu) => mu,
        StepSize::FractionOfInverseLipschitz(_) => cfg.resolve_mu(loss.lipschitz()?)?,
    };
    let g = loss.grad(x)?;
    let z: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - mu * gi).collect();
    let op = JumpThreshold::new(*p, cfg.lambda, mu)?;
    let mut out = vec![0.0; z.len()];
    Operator::Jump(op).apply_into(&z, &mut out)?;
    Ok(out)
}

pub fn ijt_solve<L: SmoothLoss + ?Sized>(
    loss: &L,
    p: &PenaltySpec,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    threshold_solve(loss, Thresholding::Jump(*p), cfg, &mut |_, _| {})
}

/// [`ijt_solve`] calling `observer(n, x^n)` after every iteration.
pub fn ijt_solve_observed<L: SmoothLoss + ?Sized>(
    loss: &L,
    p: &PenaltySpec,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<SolveResult> {
    threshold_solve(loss, Thresholding::Jump(*p), cfg, observer)
}

/// Iterative thresholding with any [`Thresholding`] rule.
pub fn threshold_solve<L: SmoothLoss + ?Sized>(
    loss: &L,
    rule: Thresholding,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    let lipschitz = loss.lipschitz()?;
    let mu = cfg.resolve_mu(lipschitz)?;
    let step_warning = mu * lipschitz >= 1.0;
    if step_warning {
        log::warn!("step size mu = {mu} is not below 1/L = {}", 1.0 / lipschitz);
    }
    let lambda = cfg.lambda;
    let op = Operator::new(rule, lambda, mu)?;
    let pair = match &op {
        Operator::Jump(j) => Some(j.pair()),
        _ => None,
    };

    let mut x = resolve_init(loss, &cfg.init)?;
    let (f0, mut g) = loss.value_and_grad(&x)?;
    let mut obj = f0 + lambda * op.penalty(&x);
    let initial_objective = obj;
    let blowup = DIVERGENCE_FACTOR * initial_objective.abs().max(f64::MIN_POSITIVE);

    let mut trace = IterTrace::starting_at(initial_objective, &x);
    let mut checks = cfg.verify.then(StepChecks::default);
    let mut min_nonzero: Option<f64> = None;
    let mut status = Status::MaxIters;
    let mut stopped_by_posteriori = false;
    let mut iterations = 0;
    let mut posteriori_cache: Option<(Vec<usize>, f64)> = None;

    let n = x.len();
    let mut z = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    for it in 1..=cfg.max_iters {
        iterations = it;
        z.iter_mut()
            .zip(x.iter().zip(&g))
            .for_each(|(zi, (xi, gi))| *zi = xi - mu * gi);
        op.apply_into(&z, &mut x_new)?;
        let (f_new, g_new) = loss.value_and_grad(&x_new)?;
        let obj_new = f_new + lambda * op.penalty(&x_new);
        let step = linalg::dist2(&x_new, &x);

        if let Some(c) = checks.as_mut() {
            let descent = obj_new - (obj - 0.5 * (1.0 / mu - lipschitz) * step * step);
            c.max_descent_violation = c.max_descent_violation.max(descent);
            if let Operator::Jump(j) = &op {
                let pen = j.penalty();
                let tau = j.pair().tau;
                for (xi, zi) in x_new.iter().zip(&z) {
                    if *xi != 0.0 {
                        let lhs = xi + lambda * mu * pen.deriv1_unchecked(xi.abs()).copysign(*xi);
                        c.max_step_identity_violation =
                            c.max_step_identity_violation.max((lhs - zi).abs());
                    } else {
                        c.max_offsupport_violation = c.max_offsupport_violation.max(zi.abs() - tau);
                    }
                }
            }
        }
        for v in x_new.iter().filter(|v| **v != 0.0) {
            let a = v.abs();
            min_nonzero = Some(min_nonzero.map_or(a, |m| m.min(a)));
        }

        let sign_changed = trace.record(it, &x_new, obj_new, step, start.elapsed().as_secs_f64());

        std::mem::swap(&mut x, &mut x_new);
        g = g_new;
        obj = obj_new;
        observer(it, &x);

        if !obj.is_finite() || obj > blowup {
            status = Status::Diverged;
            break;
        }
        let xnorm = norm2(&x);
        let rel = if step == 0.0 {
            0.0
        } else if xnorm == 0.0 {
            f64::INFINITY
        } else {
            step / xnorm
        };
        if rel <= cfg.tol_rel_change {
            status = Status::Converged;
            break;
        }
        if let (Some(target), Thresholding::Jump(p)) = (cfg.stop_on_posteriori, rule) {
            if !sign_changed {
                if let Some(bound) = posteriori_estimate(
                    loss,
                    &p,
                    lambda,
                    mu,
                    lipschitz,
                    &x,
                    step,
                    &mut posteriori_cache,
                )? {
                    if bound <= target {
                        status = Status::Converged;
                        stopped_by_posteriori = true;
                        break;
                    }
                }
            }
        }
    }

    let (support_freeze, sign_freeze) = trace.freeze_iters();
    let converged = status == Status::Converged;
    Ok(SolveResult {
        algorithm: rule.name(),
        x_final: x,
        status,
        iterations,
        trace,
        support_freeze_iter: converged.then_some(support_freeze),
        sign_freeze_iter: converged.then_some(sign_freeze),
        lambda,
        mu,
        lipschitz,
        thresholds: pair,
        min_nonzero_magnitude: min_nonzero,
        checks,
        stopped_by_posteriori,
        step_warning,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `rho/(1-rho) * step` at the current iterate, with the restricted
/// curvature cached per support for least squares (where it does not
/// depend on `x`).
#[allow(clippy::too_many_arguments)]
fn posteriori_estimate<L: SmoothLoss + ?Sized>(
    loss: &L,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
    lipschitz: f64,
    x: &[f64],
    step: f64,
    cache: &mut Option<(Vec<usize>, f64)>,
) -> Result<Option<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|i| x[*i] != 0.0).collect();
    if support.is_empty() || support.len() > diagnostics::MAX_DENSE_SUPPORT {
        return Ok(None);
    }
    let alpha_f = match cache {
        Some((s, a)) if *s == support && loss.as_least_squares().is_some() => *a,
        _ => {
            let h = loss.restricted_hessian(x, &support)?;
            let a = linalg::symmetric_eigenvalues(&h)?[0];
            *cache = Some((support.clone(), a));
            a
        }
    };
    let e = support
        .iter()
        .map(|i| x[*i].abs())
        .fold(f64::INFINITY, f64::min);
    let rho = diagnostics::contraction_factor_formula(alpha_f, lipschitz, mu, lambda, p.deriv2(e)?);
    Ok(match rho {
        Some(r) if r > 0.0 && r < 1.0 => Some(posteriori_error_bound(r, step)?),
        _ => None,
    })
}

/// `rho / (1 - rho) * ||x^{n+1} - x^n||`, a bound on the distance from
/// `x^{n+1}` to the limit once the iteration contracts at rate `rho`.
pub fn posteriori_error_bound(rho: f64, last_step_norm: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain("contraction factor", rho, "0 < rho < 1"));
    }
    if !(last_step_norm >= 0.0) {
        return Err(Error::domain("step norm", last_step_norm, ">= 0"));
    }
    Ok(rho / (1.0 - rho) * last_step_norm)
}
