//! Smooth data-fit terms `F` with Lipschitz gradients.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, PowerIteration};

/// A differentiable loss with `L`-Lipschitz gradient.
///
/// The solvers only talk to `F` through this trait, so test fixtures can
/// plug in functions that are not least squares or logistic.
pub trait SmoothLoss: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.grad(x)?))
    }

    fn lipschitz(&self) -> Result<f64>;

    /// `d^2 F / dx_I^2` at `x` for the index set `support`.
    fn restricted_hessian(&self, x: &[f64], support: &[usize]) -> Result<Matrix>;

    /// The least-squares problem behind this loss, if it is one.
    fn as_least_squares(&self) -> Option<&Problem> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `F(x) = 1/2 ||A x - y||^2`
    LeastSquares,
    /// `F(x) = 1/M sum_i log(1 + exp(-y_i u_i^T x))`, labels in `{-1, +1}`
    Logistic,
}

/// A loss over a dense design matrix `A` (`M x N`) and target `y`.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: LossKind,
    a: Matrix,
    y: Vec<f64>,
    spectral_norm_sq: OnceLock<f64>,
    power: PowerIteration,
}

impl Problem {
    pub fn new(kind: LossKind, a: Matrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                what: "observation vector",
                expected: a.rows(),
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("y[{bad}] is not finite")));
        }
        if kind == LossKind::Logistic {
            if let Some(bad) = y.iter().position(|v| *v != 1.0 && *v != -1.0) {
                return Err(Error::invalid(format!(
                    "logistic label y[{bad}] = {} is not in {{-1, +1}}",
                    y[bad]
                )));
            }
        }
        Ok(Problem {
            kind,
            a,
            y,
            spectral_norm_sq: OnceLock::new(),
            power: PowerIteration::default(),
        })
    }

    pub fn least_squares(a: Matrix, y: Vec<f64>) -> Result<Self> {
        Self::new(LossKind::LeastSquares, a, y)
    }

    pub fn logistic(u: Matrix, labels: Vec<f64>) -> Result<Self> {
        Self::new(LossKind::Logistic, u, labels)
    }

    /// Seed for the power-iteration start vector (only affects the cached
    /// spectral norm if set before its first use).
    pub fn with_power_seed(mut self, seed: u64) -> Self {
        self.power.seed = seed;
        self.spectral_norm_sq = OnceLock::new();
        self
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// `||A||_2^2`, computed once by power iteration and cached.
    pub fn spectral_norm_sq(&self) -> Result<f64> {
        if let Some(v) = self.spectral_norm_sq.get() {
            return Ok(*v);
        }
        let v = linalg::spectral_norm_sq(&self.a, self.power)?;
        Ok(*self.spectral_norm_sq.get_or_init(|| v))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.cols() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: "iterate",
                expected: self.cols(),
                got: x.len(),
            })
        }
    }

    /// `A x - y` for least squares, margins `y_i u_i^T x` for logistic.
    fn linear_part(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = self.a.mul_vec(x);
        match self.kind {
            LossKind::LeastSquares => ax.iter_mut().zip(&self.y).for_each(|(r, y)| *r -= y),
            LossKind::Logistic => ax.iter_mut().zip(&self.y).for_each(|(m, y)| *m *= y),
        }
        ax
    }

    fn value_from_linear(&self, lin: &[f64]) -> f64 {
        match self.kind {
            LossKind::LeastSquares => 0.5 * linalg::dot(lin, lin),
            LossKind::Logistic => {
                lin.iter().map(|m| softplus(-m)).sum::<f64>() / self.rows() as f64
            }
        }
    }

    fn grad_from_linear(&self, lin: &[f64]) -> Vec<f64> {
        match self.kind {
            LossKind::LeastSquares => self.a.mul_t_vec(lin),
            LossKind::Logistic => {
                let m = self.rows() as f64;
                let coef: Vec<f64> = lin
                    .iter()
                    .zip(&self.y)
                    .map(|(margin, y)| -y * sigmoid(-margin) / m)
                    .collect();
                self.a.mul_t_vec(&coef)
            }
        }
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl SmoothLoss for Problem {
    fn dim(&self) -> usize {
        self.cols()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_from_linear(&self.linear_part(x)))
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.grad_from_linear(&self.linear_part(x)))
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        let lin = self.linear_part(x);
        Ok((self.value_from_linear(&lin), self.grad_from_linear(&lin)))
    }

    /// Least squares: `||A||_2^2`. Logistic: `||U||_2^2 / (4 M)`.
    fn lipschitz(&self) -> Result<f64> {
        let s = self.spectral_norm_sq()?;
        Ok(match self.kind {
            LossKind::LeastSquares => s,
            LossKind::Logistic => s / (4.0 * self.rows() as f64),
        })
    }

    fn restricted_hessian(&self, x: &[f64], support: &[usize]) -> Result<Matrix> {
        self.check_dim(x)?;
        if let Some(bad) = support.iter().find(|i| **i >= self.cols()) {
            return Err(Error::invalid(format!("support index {bad} out of range")));
        }
        Ok(match self.kind {
            LossKind::LeastSquares => self.a.gram(support),
            LossKind::Logistic => {
                let m = self.rows() as f64;
                let w: Vec<f64> = self
                    .linear_part(x)
                    .iter()
                    .map(|margin| {
                        let s = sigmoid(*margin);
                        s * (1.0 - s) / m
                    })
                    .collect();
                self.a.weighted_gram(support, Some(&w))
            }
        })
    }

    fn as_least_squares(&self) -> Option<&Problem> {
        (self.kind == LossKind::LeastSquares).then_some(self)
    }
}

/// `F(x)` for a [`Problem`].
pub fn loss_value(prob: &Problem, x: &[f64]) -> Result<f64> {
    prob.value(x)
}

/// `grad F(x)` for a [`Problem`].
pub fn loss_grad(prob: &Problem, x: &[f64]) -> Result<Vec<f64>> {
    prob.grad(x)
}

/// Lipschitz constant of `grad F`.
pub fn lipschitz_constant(prob: &Problem) -> Result<f64> {
    prob.lipschitz()
}
