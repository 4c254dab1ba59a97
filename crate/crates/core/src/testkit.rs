//! Independent reference computations: a brute-force scalar prox,
//! central differences, an inertia-based eigenvalue bisection, a scalar
//! Newton root, and a one-dimensional loss whose objective fails the
//! KL inequality at a flat point.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::SmoothLoss;
use crate::penalty::{PenaltyFamily, PenaltySpec};

pub const ORACLE_HALFWIDTH: f64 = 2.0;
pub const ORACLE_COARSE_POINTS: usize = 100_000;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_min(h: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (h(c), h(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = h(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = h(d);
        }
    }
    0.5 * (lo + hi)
}

/// Global minimiser of `|z - v|^2 / (2 mu) + lambda phi(|v|)` over
/// `|v| <= |z| + halfwidth`: a uniform grid of `coarse_points` points,
/// two golden-section passes around the best grid point, and an explicit
/// comparison with `v = 0` (which wins ties).
pub fn prox_oracle(
    p: &PenaltySpec,
    lambda: f64,
    mu: f64,
    z: f64,
    halfwidth: f64,
    coarse_points: usize,
) -> f64 {
    let h = |v: f64| (z - v) * (z - v) / (2.0 * mu) + lambda * p.value_unchecked(v);
    let r = z.abs() + halfwidth;
    let n = coarse_points.max(1000);
    let dv = 2.0 * r / (n - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..n {
        let v = -r + k as f64 * dv;
        let hv = h(v);
        if hv < best.1 {
            best = (k, hv);
        }
    }
    let center = -r + best.0 as f64 * dv;
    // Objective differences against a reference point keep their relative
    // accuracy near the minimum, where plain values have cancelled.
    let diff = |c: f64| {
        move |v: f64| {
            (c - v) * (2.0 * z - v - c) / (2.0 * mu) + lambda * phi_diff(p, v.abs(), c.abs())
        }
    };
    let first = golden_min(&diff(center), center - dv, center + dv, 1e-6 * dv);
    let second = golden_min(
        &diff(first),
        first - 2e-6 * dv,
        first + 2e-6 * dv,
        1e-15 * r.max(1.0),
    );
    let v =
        [first, second].into_iter().fold(
            center,
            |acc, cand| if diff(acc)(cand) < 0.0 { cand } else { acc },
        );
    if diff(v)(0.0) <= 0.0 {
        0.0
    } else {
        v
    }
}

/// `phi(v) - phi(c)` for `v, c >= 0`, accurate when `v` is close to `c`.
fn phi_diff(p: &PenaltySpec, v: f64, c: f64) -> f64 {
    if c == 0.0 || v == 0.0 {
        return p.value_unchecked(v) - p.value_unchecked(c);
    }
    let q = p.q();
    // v^q - c^q = c^q (exp(q ln(1 + (v - c)/c)) - 1)
    let pow_diff = c.powf(q) * (q * ((v - c) / c).ln_1p()).exp_m1();
    match p.family() {
        PenaltyFamily::Power => pow_diff,
        PenaltyFamily::LogPower => (pow_diff / (1.0 + c.powf(q))).ln_1p(),
    }
}

/// `(f(x + h) - f(x - h)) / (2h)`.
pub fn finite_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Componentwise central differences of `f` at `x`.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Number of eigenvalues of the symmetric `m` below `sigma`, from the
/// signs of the pivots of an LDL^T factorisation of `m - sigma I`.
pub fn count_eigenvalues_below(m: &Matrix, sigma: f64) -> usize {
    let n = m.rows();
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    let mut count = 0;
    for j in 0..n {
        let mut dj = m.get(j, j) - sigma;
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if dj == 0.0 {
            dj = -f64::EPSILON * (1.0 + sigma.abs());
        }
        d[j] = dj;
        if dj < 0.0 {
            count += 1;
        }
        for i in j + 1..n {
            let mut v = m.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = v / dj;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric matrix by bisection on the
/// Gershgorin interval, to absolute accuracy `tol`.
pub fn min_eig_bisection(m: &Matrix, tol: f64) -> Result<f64> {
    let n = m.rows();
    if n == 0 || n != m.cols() {
        return Err(Error::invalid(
            "min_eig_bisection needs a non-empty square matrix",
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let off: f64 = (0..n).filter(|j| *j != i).map(|j| m.get(i, j).abs()).sum();
        lo = lo.min(m.get(i, i) - off);
        hi = hi.max(m.get(i, i) + off);
    }
    lo -= tol;
    hi += tol;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count_eigenvalues_below(m, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of `x - y + lambda phi'(x) = 0` near `y > 0` by Newton's method:
/// the stationary point of `1/2 (x - y)^2 + lambda phi(|x|)` on `x > 0`.
pub fn scalar_stationary_root(p: &PenaltySpec, y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::domain("y", y, "y > 0"));
    }
    let mut x = y;
    for _ in 0..100 {
        let g = x - y + lambda * p.deriv1(x)?;
        let dg = 1.0 + lambda * p.deriv2(x)?;
        let next = x - g / dg;
        if !(next > 0.0) {
            return Err(Error::Convergence {
                what: "scalar Newton left the positive axis",
                iterations: 0,
            });
        }
        if (next - x).abs() <= 1e-16 * x {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// A one-dimensional smooth `f` such that `g = f + phi(|.|)` equals
/// `exp(-1/(z-1)^2) + C` on `(1/2, 3/2)`: flat to all orders at `z = 1`,
/// where the KL inequality fails. Outside that interval `f` continues as
/// quadratics matched in value and first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonKLFixture {
    pub penalty: PenaltySpec,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub big_c: f64,
    lipschitz: f64,
}

fn bump(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (-1.0 / (t * t)).exp()
    }
}

fn bump_d1(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        bump(t) * 2.0 / (t * t * t)
    }
}

fn bump_d2(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        bump(t) * (4.0 / t.powi(6) - 6.0 / t.powi(4))
    }
}

impl NonKLFixture {
    pub fn new(penalty: PenaltySpec) -> Result<Self> {
        let e4 = (-4.0f64).exp();
        let phi = |z: f64| penalty.value(z);
        let (d1h, d2h) = (penalty.deriv1(0.5)?, penalty.deriv2(0.5)?);
        let (d1t, d2t) = (penalty.deriv1(1.5)?, penalty.deriv2(1.5)?);
        let a1 = 80.0 * e4 - 0.5 * d2h;
        let b1 = 0.5 + (16.0 * e4 + d1h) / (160.0 * e4 - d2h);
        let a2 = 80.0 * e4 - 0.5 * d2t;
        let b2 = 1.5 - (16.0 * e4 - d1t) / (160.0 * e4 - d2t);
        let left = phi(0.5)? + a1 * (0.5 - b1).powi(2);
        let right = phi(1.5)? + a2 * (1.5 - b2).powi(2);
        let big_c = phi(1.5)? + left.max(right);
        let c1 = big_c + e4 - left;
        let c2 = big_c + e4 - right;
        let mut fix = NonKLFixture {
            penalty,
            a1,
            b1,
            c1,
            a2,
            b2,
            c2,
            big_c,
            lipschitz: 0.0,
        };
        let n = 100_000;
        let mut lip = (2.0 * a1).abs().max((2.0 * a2).abs());
        for k in 0..=n {
            let z = 0.5 + k as f64 / n as f64;
            lip = lip.max(fix.f_d2(z).abs());
        }
        fix.lipschitz = lip;
        Ok(fix)
    }

    /// With `phi(z) = z^(1/2)`.
    pub fn standard() -> Self {
        Self::new(PenaltySpec::power(0.5).expect("q = 1/2 is valid"))
            .expect("fixture constants are finite for q = 1/2")
    }

    fn phi(&self, z: f64) -> f64 {
        self.penalty.value_unchecked(z)
    }

    /// Left quadratic, used for `z <= 1/2`.
    pub fn f_left(&self, z: f64) -> f64 {
        self.a1 * (z - self.b1).powi(2) + self.c1
    }

    /// Middle piece `exp(-1/(z-1)^2) - phi(z) + C`, used on `(1/2, 3/2)`.
    pub fn f_middle(&self, z: f64) -> f64 {
        bump(z - 1.0) - self.phi(z) + self.big_c
    }

    /// Right quadratic, used for `z >= 3/2`.
    pub fn f_right(&self, z: f64) -> f64 {
        self.a2 * (z - self.b2).powi(2) + self.c2
    }

    pub fn f(&self, z: f64) -> f64 {
        if z <= 0.5 {
            self.f_left(z)
        } else if z < 1.5 {
            self.f_middle(z)
        } else {
            self.f_right(z)
        }
    }

    pub fn f_d1(&self, z: f64) -> f64 {
        if z <= 0.5 {
            2.0 * self.a1 * (z - self.b1)
        } else if z < 1.5 {
            bump_d1(z - 1.0) - self.penalty.deriv1_unchecked(z)
        } else {
            2.0 * self.a2 * (z - self.b2)
        }
    }

    pub fn f_d2(&self, z: f64) -> f64 {
        if z <= 0.5 {
            2.0 * self.a1
        } else if z < 1.5 {
            bump_d2(z - 1.0) - self.penalty.deriv2_unchecked(z)
        } else {
            2.0 * self.a2
        }
    }

    /// `g(z) = f(z) + phi(|z|)`; `g(1) = C`.
    pub fn g(&self, z: f64) -> f64 {
        self.f(z) + self.phi(z.abs())
    }

    /// Value and first-derivative mismatches of the pieces of `f` at
    /// `z = 1/2` and `z = 3/2`.
    pub fn junction_mismatches(&self) -> [f64; 4] {
        let (l, r) = (0.5, 1.5);
        [
            (self.f_left(l) - self.f_middle(l)).abs(),
            (2.0 * self.a1 * (l - self.b1) - (bump_d1(l - 1.0) - self.penalty.deriv1_unchecked(l)))
                .abs(),
            (self.f_middle(r) - self.f_right(r)).abs(),
            ((bump_d1(r - 1.0) - self.penalty.deriv1_unchecked(r)) - 2.0 * self.a2 * (r - self.b2))
                .abs(),
        ]
    }
}

/// `f` of the fixture as a one-dimensional loss. `L` is the largest
/// `|f''|` found on a grid of `[1/2, 3/2]` together with the quadratic
/// pieces.
impl SmoothLoss for NonKLFixture {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_scalar(x)?;
        Ok(self.f(x[0]))
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_scalar(x)?;
        Ok(vec![self.f_d1(x[0])])
    }

    fn lipschitz(&self) -> Result<f64> {
        Ok(self.lipschitz)
    }

    fn restricted_hessian(&self, x: &[f64], support: &[usize]) -> Result<Matrix> {
        check_scalar(x)?;
        match support {
            [] => Ok(Matrix::zeros(0, 0)),
            [0] => Ok(Matrix::from_diag(&[self.f_d2(x[0])])),
            _ => Err(Error::invalid(
                "support index out of range for a scalar loss",
            )),
        }
    }
}

fn check_scalar(x: &[f64]) -> Result<()> {
    if x.len() == 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "fixture iterate",
            expected: 1,
            got: x.len(),
        })
    }
}
