//! Dense square matrices and the symmetric eigensolver.
//!
//! Eigenvalues come from a Householder reduction to tridiagonal form followed
//! by the implicit QL iteration with Wilkinson-style shifts (the classic
//! `tred2`/`tql2` pair). The eigenvalue-only path skips every accumulation of
//! the orthogonal factor, which keeps the bootstrap inner loop at roughly
//! `4/3 n^3` flops per matrix.

use crate::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from rows; panics if the rows do not form a square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `P A P^T` where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending; column `k` of
/// `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Symmetry tolerance accepted by the eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn check_symmetric(a: &Matrix) -> Result<()> {
    let asym = a.max_asymmetry();
    let scale = a.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// All eigenvalues, descending. Ties keep their position in the QL output.
pub fn eigenvalues_sym(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let (mut d, mut e) = tridiagonalize(a, None);
    ql_implicit(&mut d, &mut e, None)?;
    sort_descending(&mut d);
    Ok(d)
}

/// Eigenvalues and orthonormal eigenvectors.
pub fn eigen_sym(a: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.n();
    let mut q = Matrix::identity(n);
    let (mut d, mut e) = tridiagonalize(a, Some(&mut q));
    ql_implicit(&mut d, &mut e, Some(&mut q))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = Matrix::from_fn(n, |i, j| q.get(i, order[j]));
    Ok(SymmetricEigen { values, vectors })
}

fn sort_descending(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

/// Householder reduction `A = Q T Q^T`. Returns the diagonal `d` and the
/// off-diagonal `e` (`e[i]` couples `i` and `i + 1`, `e[n-1] = 0`). When `q`
/// is given it must hold the identity on entry and receives `Q`.
fn tridiagonalize(a: &Matrix, q: Option<&mut Matrix>) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut w = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        let lo = k + 1;
        let x0 = w[lo * n + k];
        let tail: f64 = (lo + 1..n).map(|i| w[i * n + k].powi(2)).sum();
        d[k] = w[k * n + k];
        if tail == 0.0 {
            e[k] = x0;
            continue;
        }
        let norm = (x0 * x0 + tail).sqrt();
        let alpha = if x0 > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (lo..n).map(|i| w[i * n + k]).collect();
        v[0] -= alpha;
        let vtv = v[0] * v[0] + tail;
        let beta = 2.0 / vtv;

        // p = beta * A v over the trailing block
        for (pi, i) in (lo..n).enumerate() {
            let row = &w[i * n + lo..i * n + n];
            p[pi] = beta * row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        let m = n - lo;
        let kappa = 0.5 * beta * (0..m).map(|i| v[i] * p[i]).sum::<f64>();
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        for i in 0..m {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut w[(lo + i) * n + lo..(lo + i) * n + n];
            for j in 0..m {
                row[j] -= vi * p[j] + pi * v[j];
            }
        }
        e[k] = alpha;
        if q.is_some() {
            reflectors.push((lo, v, beta));
        }
    }
    if n > 0 {
        d[n - 1] = w[(n - 1) * n + (n - 1)];
        e[n - 1] = 0.0;
    }

    if let Some(q) = q {
        // Q = H_0 H_1 ... H_last, built right to left.
        for (lo, v, beta) in reflectors.iter().rev() {
            for j in 0..n {
                let s: f64 = v.iter().enumerate().map(|(i, vi)| vi * q.get(lo + i, j)).sum();
                if s != 0.0 {
                    let s = s * beta;
                    for (i, vi) in v.iter().enumerate() {
                        let idx = (lo + i) * n + j;
                        q.data[idx] -= s * vi;
                    }
                }
            }
        }
    }
    (d, e)
}

const MAX_QL_ITERATIONS: usize = 60;

/// Implicit QL on the symmetric tridiagonal `(d, e)`; on return `d` holds the
/// (unsorted) eigenvalues. Rotations are applied to the columns of `v`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut v: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            let h = v.get(k, i + 1);
                            let vi = v.get(k, i);
                            v.set(k, i + 1, s * vi + c * h);
                            v.set(k, i, c * vi - s * h);
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
