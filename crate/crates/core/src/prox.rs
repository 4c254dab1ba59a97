//! Jumping thresholding operators.
//!
//! For a penalty `phi` the scalar proximity map
//! `argmin_v |z - v|^2 / (2 mu) + lambda phi(|v|)` is zero below a threshold
//! `tau` and jumps to a magnitude of at least `eta` above it. Above the
//! threshold the output solves `rho(v) = |z|` with
//! `rho(v) = v + lambda mu phi'(v)` on its increasing branch.
//!
//! At `|z| == tau` the minimiser is not unique; this module returns `0`.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::penalty::{PenaltyFamily, PenaltySpec};

const ROOT_MAX_ITERS: usize = 200;
const BRACKET_MAX_DOUBLINGS: usize = 200;

/// The jump location `tau` and the smallest non-zero output magnitude
/// `eta` of a thresholding operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub eta: f64,
    pub tau: f64,
    pub lambda_mu: f64,
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, v, "finite value > 0"))
    }
}

/// `rho(v) = v + lambda_mu * phi'(v)`.
pub fn rho(p: &PenaltySpec, lambda_mu: f64, v: f64) -> Result<f64> {
    check_positive("rho: lambda*mu", lambda_mu)?;
    Ok(v + lambda_mu * p.deriv1(v)?)
}

/// `psi(z) = 2 (phi(z) - z phi'(z)) / z^2`.
pub fn psi(p: &PenaltySpec, z: f64) -> Result<f64> {
    p.psi(z)
}

/// Threshold pair for `lambda` and step `mu`. The power family uses the
/// closed form `eta = (2 lambda mu (1 - q))^(1/(2-q))`; other families
/// invert `psi` numerically.
pub fn thresholds(p: &PenaltySpec, lambda: f64, mu: f64) -> Result<ThresholdPair> {
    check_positive("thresholds: lambda", lambda)?;
    check_positive("thresholds: mu", mu)?;
    let lambda_mu = lambda * mu;
    match p.family() {
        PenaltyFamily::Power => {
            let q = p.q();
            let eta = (2.0 * lambda_mu * (1.0 - q)).powf(1.0 / (2.0 - q));
            let tau = (2.0 - q) / (2.0 - 2.0 * q) * eta;
            Ok(ThresholdPair {
                eta,
                tau,
                lambda_mu,
            })
        }
        PenaltyFamily::LogPower => thresholds_by_inversion(p, lambda, mu),
    }
}

/// Threshold pair from `eta = psi^{-1}(1 / (lambda mu))` (bisection on the
/// strictly decreasing `psi`) and `tau = rho(eta)`, for any family.
pub fn thresholds_by_inversion(p: &PenaltySpec, lambda: f64, mu: f64) -> Result<ThresholdPair> {
    check_positive("thresholds: lambda", lambda)?;
    check_positive("thresholds: mu", mu)?;
    let lambda_mu = lambda * mu;
    let target = 1.0 / lambda_mu;

    // Bracket [lo, hi] with psi(lo) >= target >= psi(hi), grown from z = 1.
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if p.psi_generic(1.0)? > target {
        let mut found = false;
        for _ in 0..BRACKET_MAX_DOUBLINGS {
            lo = hi;
            hi *= 2.0;
            if p.psi_generic(hi)? <= target {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Convergence {
                what: "eta bracket (doubling)",
                iterations: BRACKET_MAX_DOUBLINGS,
            });
        }
    } else {
        let mut found = false;
        for _ in 0..BRACKET_MAX_DOUBLINGS {
            hi = lo;
            lo *= 0.5;
            if p.psi_generic(lo)? >= target {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Convergence {
                what: "eta bracket (halving)",
                iterations: BRACKET_MAX_DOUBLINGS,
            });
        }
    }

    for _ in 0..ROOT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.psi_generic(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    let tau = eta + lambda_mu * p.deriv1(eta)?;
    Ok(ThresholdPair {
        eta,
        tau,
        lambda_mu,
    })
}

/// A thresholding operator with its thresholds precomputed, for repeated
/// application inside iterative solvers.
#[derive(Debug, Clone, Copy)]
pub struct JumpThreshold {
    penalty: PenaltySpec,
    pair: ThresholdPair,
}

impl JumpThreshold {
    pub fn new(penalty: PenaltySpec, lambda: f64, mu: f64) -> Result<Self> {
        Ok(JumpThreshold {
            penalty,
            pair: thresholds(&penalty, lambda, mu)?,
        })
    }

    #[inline]
    pub fn pair(&self) -> ThresholdPair {
        self.pair
    }

    #[inline]
    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn apply(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::domain("prox input", z, "finite"));
        }
        let a = z.abs();
        if a <= self.pair.tau {
            return Ok(0.0);
        }
        let v = self.invert_rho(a)?;
        Ok(if z < 0.0 { -v } else { v })
    }

    /// Root of `rho(v) = a` on `[eta, a]` for `a > tau`.
    ///
    /// `rho` is convex and increasing on this interval and `rho(a) > a`, so
    /// Newton started at `a` decreases monotonically onto the root; the
    /// bracket only guards against rounding.
    fn invert_rho(&self, a: f64) -> Result<f64> {
        let lm = self.pair.lambda_mu;
        let p = &self.penalty;
        let (mut lo, mut hi) = (self.pair.eta, a);
        let mut v = a;
        for _ in 0..ROOT_MAX_ITERS {
            let f = v + lm * p.deriv1_unchecked(v) - a;
            if f == 0.0 {
                return Ok(v);
            }
            if f > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let slope = 1.0 + lm * p.deriv2_unchecked(v);
            let mut next = v - f / slope;
            if !(slope > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-15 * v.abs() || hi - lo <= 1e-15 * hi {
                return Ok(next);
            }
            v = next;
        }
        Err(Error::Convergence {
            what: "prox root (rho inversion)",
            iterations: ROOT_MAX_ITERS,
        })
    }
}

/// Scalar jumping thresholding operator.
pub fn prox_scalar(p: &PenaltySpec, lambda: f64, mu: f64, z: f64) -> Result<f64> {
    JumpThreshold::new(*p, lambda, mu)?.apply(z)
}

/// Componentwise [`prox_scalar`].
pub fn prox_vector(p: &PenaltySpec, lambda: f64, mu: f64, x: &[f64]) -> Result<Vec<f64>> {
    prox_vector_with(Exec::Sequential, p, lambda, mu, x)
}

/// Componentwise [`prox_scalar`] on the given executor. Components are
/// independent, so the result does not depend on the executor.
pub fn prox_vector_with(
    exec: Exec,
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let op = JumpThreshold::new(*p, lambda, mu)?;
    exec.map_indexed(x, |i, z| op.apply(*z).map_err(|e| Error::at(i, e)))
        .into_iter()
        .collect()
}

/// Soft thresholding `sign(z) max(|z| - threshold, 0)`.
#[inline]
pub fn prox_soft(threshold: f64, z: f64) -> f64 {
    let a = z.abs() - threshold;
    if a > 0.0 {
        a.copysign(z)
    } else {
        0.0
    }
}

/// Hard thresholding: keep `z` iff `|z| > sqrt(2 lambda mu)`.
#[inline]
pub fn prox_hard(lambda_mu: f64, z: f64) -> f64 {
    if z.abs() > (2.0 * lambda_mu).sqrt() {
        z
    } else {
        0.0
    }
}
