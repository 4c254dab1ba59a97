//! Comparison solvers: FISTA for the l1-regularised least-squares problem,
//! and the reweighted schemes IRLS and IRL1 for the lq penalty.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dist2, norm2};
use crate::loss::{LossKind, Problem};
use crate::prox::prox_soft;
use crate::solver::{IterTrace, SolveResult, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct FistaOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

fn require_least_squares(prob: &Problem, who: &str) -> Result<()> {
    if prob.kind() == LossKind::LeastSquares {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{who} needs a least-squares problem"
        )))
    }
}

fn rel_change(step: f64, x: &[f64]) -> f64 {
    if step == 0.0 {
        return 0.0;
    }
    let n = norm2(x);
    if n == 0.0 {
        f64::INFINITY
    } else {
        step / n
    }
}

/// Minimises `1/2 ||Ax - y||^2 + lambda ||x||_1` by FISTA with
/// function-value restart, from zero.
pub fn fista_l1(prob: &Problem, lambda: f64, tol: f64, max_iters: usize) -> Result<FistaOutcome> {
    require_least_squares(prob, "fista_l1")?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("lambda", lambda, "finite value > 0"));
    }
    let x0 = vec![0.0; prob.cols()];
    fista_weighted(prob, lambda, None, x0, tol, max_iters)
}

/// FISTA for `1/2 ||Ax - y||^2 + lambda sum_i w_i |x_i|` (`w = 1` when
/// absent), warm-started from `x0`. The residuals `Ax` of the iterates are
/// carried along so each step costs one product with `A` and one with
/// `A^T`.
pub fn fista_weighted(
    prob: &Problem,
    lambda: f64,
    weights: Option<&[f64]>,
    x0: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<FistaOutcome> {
    require_least_squares(prob, "fista")?;
    let n = prob.cols();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "fista start",
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                what: "fista weights",
                expected: n,
                got: w.len(),
            });
        }
    }
    let a = prob.matrix();
    let y = prob.y();
    let lip = prob.spectral_norm_sq()?;
    if lip == 0.0 {
        return Ok(FistaOutcome {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            objective: 0.5 * linalg::dot(y, y),
        });
    }
    let mu = 1.0 / lip;
    let w_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let objective = |x: &[f64], ax: &[f64]| {
        let r: f64 = ax.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
        let pen: f64 = x.iter().enumerate().map(|(i, v)| w_at(i) * v.abs()).sum();
        0.5 * r + lambda * pen
    };

    let mut x = x0;
    let mut ax = a.mul_vec(&x);
    let mut obj = objective(&x, &ax);
    let mut x_prev = x.clone();
    let mut ax_prev = ax.clone();
    let mut t = 1.0f64;
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; y.len()];
    let mut r = vec![0.0; y.len()];
    let mut g = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut ax_new = vec![0.0; y.len()];

    let step_from = |v: &[f64], av: &[f64], g: &mut Vec<f64>, r: &mut Vec<f64>, out: &mut [f64]| {
        r.iter_mut()
            .zip(av.iter().zip(y))
            .for_each(|(ri, (u, yi))| *ri = u - yi);
        a.mul_t_vec_into(r, g);
        for i in 0..n {
            out[i] = prox_soft(mu * lambda * w_at(i), v[i] - mu * g[i]);
        }
    };

    for it in 1..=max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            v[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        for j in 0..av.len() {
            av[j] = ax[j] + beta * (ax[j] - ax_prev[j]);
        }
        step_from(&v, &av, &mut g, &mut r, &mut x_new);
        a.mul_vec_into(&x_new, &mut ax_new);
        let mut obj_new = objective(&x_new, &ax_new);
        t = t_next;
        if obj_new > obj {
            // Restart: drop momentum and take a plain proximal step from x.
            t = 1.0;
            step_from(&x, &ax, &mut g, &mut r, &mut x_new);
            a.mul_vec_into(&x_new, &mut ax_new);
            obj_new = objective(&x_new, &ax_new);
        }
        let step = dist2(&x_new, &x);
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut ax_prev, &mut ax);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut ax, &mut ax_new);
        obj = obj_new;
        if rel_change(step, &x) <= tol {
            return Ok(FistaOutcome {
                x,
                iterations: it,
                converged: true,
                objective: obj,
            });
        }
    }
    Ok(FistaOutcome {
        x,
        iterations: max_iters,
        converged: false,
        objective: obj,
    })
}

/// Parameters of the reweighted solvers. `eps` starts at `eps0` and is
/// multiplied by `decay` (down to `floor`) whenever the outer relative
/// change falls below `stall_tol`. The run converges once `eps` sits at
/// its floor and the outer relative change is below `outer_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub lambda: f64,
    pub q: f64,
    pub eps0: f64,
    pub decay: f64,
    pub floor: f64,
    pub outer_max: usize,
    pub outer_tol: f64,
    pub stall_tol: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            lambda: 0.001,
            q: 0.5,
            eps0: 1.0,
            decay: 0.1,
            floor: 1e-8,
            outer_max: 100,
            outer_tol: 1e-6,
            stall_tol: 1e-3,
            inner_tol: 1e-8,
            inner_max: 5000,
        }
    }
}

impl BaselineConfig {
    pub fn new(lambda: f64, q: f64) -> Self {
        BaselineConfig {
            lambda,
            q,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |what: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(what, v, "finite value > 0"))
            }
        };
        pos("lambda", self.lambda)?;
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::domain("q", self.q, "0 < q < 1"));
        }
        pos("eps0", self.eps0)?;
        pos("floor", self.floor)?;
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::domain("decay", self.decay, "0 < decay < 1"));
        }
        pos("outer_tol", self.outer_tol)?;
        pos("stall_tol", self.stall_tol)?;
        pos("inner_tol", self.inner_tol)?;
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(Error::invalid("outer_max and inner_max must be positive"));
        }
        Ok(())
    }
}

/// Shared outer loop. `inner(x, eps)` returns the next iterate and
/// whether its inner solve met `inner_tol`; `objective(x, eps)` is the
/// smoothed objective recorded in the trace.
fn reweighted_loop(
    name: &'static str,
    prob: &Problem,
    cfg: &BaselineConfig,
    mut inner: impl FnMut(&[f64], f64) -> Result<(Vec<f64>, bool)>,
    objective: impl Fn(&[f64], f64) -> Result<f64>,
) -> Result<SolveResult> {
    cfg.validate()?;
    require_least_squares(prob, name)?;
    let start = Instant::now();
    let lipschitz = prob.spectral_norm_sq()?;
    let mut x = vec![0.0; prob.cols()];
    let mut eps = cfg.eps0.max(cfg.floor);
    let mut trace = IterTrace::starting_at(objective(&x, eps)?, &x);
    let mut status = Status::MaxIters;
    let mut iterations = 0;
    let mut min_nonzero: Option<f64> = None;
    let mut inner_failures = 0usize;

    for it in 1..=cfg.outer_max {
        iterations = it;
        let (x_new, inner_ok) = inner(&x, eps)?;
        if !inner_ok {
            inner_failures += 1;
        }
        let step = dist2(&x_new, &x);
        x = x_new;
        if x.iter().any(|v| !v.is_finite()) {
            status = Status::Diverged;
            break;
        }
        for v in x.iter().filter(|v| **v != 0.0) {
            min_nonzero = Some(min_nonzero.map_or(v.abs(), |m: f64| m.min(v.abs())));
        }
        trace.record(
            it,
            &x,
            objective(&x, eps)?,
            step,
            start.elapsed().as_secs_f64(),
        );
        let rel = rel_change(step, &x);
        if eps <= cfg.floor && rel <= cfg.outer_tol {
            status = Status::Converged;
            break;
        }
        if rel <= cfg.stall_tol.max(cfg.outer_tol) {
            eps = (eps * cfg.decay).max(cfg.floor);
        }
    }
    if inner_failures > 0 {
        log::warn!("{name}: {inner_failures} inner solves stopped before inner_tol");
    }

    let (support_freeze, sign_freeze) = trace.freeze_iters();
    let converged = status == Status::Converged;
    Ok(SolveResult {
        algorithm: name,
        x_final: x,
        status,
        iterations,
        trace,
        support_freeze_iter: converged.then_some(support_freeze),
        sign_freeze_iter: converged.then_some(sign_freeze),
        lambda: cfg.lambda,
        mu: 1.0 / lipschitz,
        lipschitz,
        thresholds: None,
        min_nonzero_magnitude: min_nonzero,
        checks: None,
        stopped_by_posteriori: false,
        step_warning: false,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Iteratively reweighted least squares for
/// `1/2 ||Ax - y||^2 + lambda sum_i (x_i^2 + eps)^(q/2)`: each outer step
/// solves `(A^T A + lambda q diag(w)) x = A^T y` with
/// `w_i = (x_i^2 + eps)^(q/2 - 1)` by conjugate gradients.
pub fn irls_solve(prob: &Problem, cfg: &BaselineConfig) -> Result<SolveResult> {
    let a = prob.matrix();
    let aty = a.mul_t_vec(prob.y());
    let (lambda, q) = (cfg.lambda, cfg.q);
    let inner = |x: &[f64], eps: f64| {
        let d: Vec<f64> = x
            .iter()
            .map(|v| lambda * q * (v * v + eps).powf(0.5 * q - 1.0))
            .collect();
        let mut sol = x.to_vec();
        let apply = |p: &[f64], out: &mut [f64]| {
            let mut ap = vec![0.0; a.rows()];
            a.mul_vec_into(p, &mut ap);
            a.mul_t_vec_into(&ap, out);
            out.iter_mut()
                .zip(p.iter().zip(&d))
                .for_each(|(o, (pi, di))| *o += di * pi);
        };
        let (_, ok) =
            linalg::conjugate_gradient(apply, &aty, &mut sol, cfg.inner_tol, cfg.inner_max);
        Ok((sol, ok))
    };
    let objective = |x: &[f64], eps: f64| {
        let f = crate::loss::loss_value(prob, x)?;
        let pen: f64 = x.iter().map(|v| (v * v + eps).powf(0.5 * q)).sum();
        Ok(f + lambda * pen)
    };
    reweighted_loop("irls", prob, cfg, inner, objective)
}

/// Iteratively reweighted l1 for
/// `1/2 ||Ax - y||^2 + lambda sum_i (|x_i| + eps)^q`: each outer step runs
/// FISTA on the weighted l1 problem with `w_i = q (|x_i| + eps)^(q-1)`,
/// warm-started at the current iterate.
pub fn irl1_solve(prob: &Problem, cfg: &BaselineConfig) -> Result<SolveResult> {
    let (lambda, q) = (cfg.lambda, cfg.q);
    let inner = |x: &[f64], eps: f64| {
        let w: Vec<f64> = x
            .iter()
            .map(|v| q * (v.abs() + eps).powf(q - 1.0))
            .collect();
        let out = fista_weighted(
            prob,
            lambda,
            Some(&w),
            x.to_vec(),
            cfg.inner_tol,
            cfg.inner_max,
        )?;
        Ok((out.x, out.converged))
    };
    let objective = |x: &[f64], eps: f64| {
        let f = crate::loss::loss_value(prob, x)?;
        let pen: f64 = x.iter().map(|v| (v.abs() + eps).powf(q)).sum();
        Ok(f + lambda * pen)
    };
    reweighted_loop("irl1", prob, cfg, inner, objective)
}
