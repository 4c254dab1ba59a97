//! Dense row-major matrices and the handful of kernels the solvers need:
//! matrix-vector products, power iteration for the spectral norm and a
//! cyclic Jacobi eigen-solver for small symmetric matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry ({}, {}) is not finite",
                bad / cols,
                bad % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    /// Square (or the leading block of a) diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                what: "matrix row",
                expected: c,
                got: bad.len(),
            });
        }
        Self::new(r, c, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `out = A x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = A^T r`, accumulated row by row (fixed summation order).
    pub fn mul_t_vec_into(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ri, row) in r.iter().zip(self.data.chunks_exact(self.cols)) {
            if *ri == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += ri * a;
            }
        }
    }

    pub fn mul_t_vec(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.mul_t_vec_into(r, &mut out);
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A^T A` restricted to the columns in `cols`, optionally weighting
    /// each row: `sum_k w_k a_{k,i} a_{k,j}`.
    pub fn weighted_gram(&self, cols: &[usize], row_weights: Option<&[f64]>) -> Matrix {
        let s = cols.len();
        let mut g = Matrix::zeros(s, s);
        for k in 0..self.rows {
            let row = self.row(k);
            let w = row_weights.map_or(1.0, |w| w[k]);
            for (a, &ci) in cols.iter().enumerate() {
                let wa = w * row[ci];
                if wa == 0.0 {
                    continue;
                }
                for (b, &cj) in cols.iter().enumerate().skip(a) {
                    g.data[a * s + b] += wa * row[cj];
                }
            }
        }
        for a in 0..s {
            for b in 0..a {
                g.data[a * s + b] = g.data[b * s + a];
            }
        }
        g
    }

    /// Gram matrix `A_I^T A_I` of the selected columns.
    pub fn gram(&self, cols: &[usize]) -> Matrix {
        self.weighted_gram(cols, None)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean squared error `||a - b||^2 / n`.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    let d = dist2(a, b);
    d * d / a.len() as f64
}

/// Settings for [`spectral_norm_sq`].
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            rel_tol: 1e-10,
            max_iters: 5000,
            seed: 0x5eed_1e55,
        }
    }
}

/// `||A||_2^2`, the largest eigenvalue of `A^T A`, by power iteration from
/// a seeded Gaussian start vector.
pub fn spectral_norm_sq(a: &Matrix, opts: PowerIteration) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..a.cols())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; a.cols()];
    let mut estimate = 0.0;
    for _ in 0..opts.max_iters {
        a.mul_vec_into(&v, &mut av);
        // Rayleigh quotient of A^T A at the unit vector v.
        let rq = dot(&av, &av);
        a.mul_t_vec_into(&av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            // v is in the null space; A is zero or the start was unlucky.
            return if a.as_slice().iter().all(|x| *x == 0.0) {
                Ok(0.0)
            } else {
                Err(Error::Convergence {
                    what: "power iteration (start vector in null space)",
                    iterations: 0,
                })
            };
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
        if (rq - estimate).abs() <= opts.rel_tol * rq {
            return Ok(rq.max(estimate));
        }
        estimate = rq;
    }
    Err(Error::Convergence {
        what: "power iteration",
        iterations: opts.max_iters,
    })
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() != m.cols() {
        return Err(Error::invalid(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let scale = m.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if !m.is_symmetric(1e-12 * scale.max(1.0)) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let mut a = m.data.clone();
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    Err(Error::Convergence {
        what: "Jacobi eigenvalue sweeps",
        iterations: MAX_SWEEPS,
    })
}

/// Solves `M x = b` for symmetric positive definite `M` (given as a
/// matrix-vector closure) by conjugate gradients, warm-started from `x`.
/// Returns the number of iterations and whether the relative residual fell
/// below `rel_tol`.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> (usize, bool)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0, true);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iters {
        if rr.sqrt() <= rel_tol * bnorm {
            return (it, true);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return (it, false);
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut()
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= alpha * api);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_new;
    }
    (max_iters, rr.sqrt() <= rel_tol * bnorm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_by_hand() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.mul_vec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(a.mul_t_vec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
        assert_eq!(a.transpose().mul_vec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn gram_of_selected_columns() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 3.0]]).unwrap();
        let g = a.gram(&[0, 2]);
        assert_eq!(g.as_slice(), &[1.0, 0.0, 0.0, 9.0]);
        let g = a.gram(&[1]);
        assert_eq!(g.as_slice(), &[5.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Matrix::from_diag(&[3.0, 1.0]);
        let l = spectral_norm_sq(&a, PowerIteration::default()).unwrap();
        assert!((l - 9.0).abs() < 1e-9);
        let l = spectral_norm_sq(&Matrix::identity(3), PowerIteration::default()).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(symmetric_eigenvalues(&m).is_err());
    }

    #[test]
    fn cg_solves_spd_system() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let mut x = vec![0.0; 2];
        let (_, ok) = conjugate_gradient(
            |v, out| m.mul_vec_into(v, out),
            &[1.0, 2.0],
            &mut x,
            1e-14,
            10,
        );
        assert!(ok);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-13 && (x[1] - 7.0 / 11.0).abs() < 1e-13);
    }
}
