//! Dense factorizations behind the minimum-norm least-squares solve.
//!
//! The wide or tall input is first reduced with a Householder QR of its tall
//! orientation, then the small square triangular factor gets a one-sided
//! Jacobi SVD. QR leaves singular values untouched, so truncation against
//! `rcond * sigma_max` is the same as on the original matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::matrix::Matrix;

/// Householder QR of a tall matrix stored as columns (`n` columns of length `m >= n`).
struct HouseholderQr {
    m: usize,
    /// Reflector `k` acts on rows `k..m`; `v[k]` has length `m - k`.
    v: Vec<Vec<f64>>,
    beta: Vec<f64>,
    /// Upper-triangular `n x n`, column-major.
    r: Vec<Vec<f64>>,
}

impl HouseholderQr {
    fn factor(mut cols: Vec<Vec<f64>>, m: usize) -> Self {
        let n = cols.len();
        debug_assert!(m >= n);
        let mut v = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for k in 0..n {
            let x = &cols[k][k..];
            let norm = math::sqrt(x.iter().map(|a| a * a).sum());
            let mut vk = x.to_vec();
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            vk[0] -= alpha;
            let vtv: f64 = vk.iter().map(|a| a * a).sum();
            let bk = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            if bk != 0.0 {
                for col in cols.iter_mut().skip(k) {
                    reflect(&vk, bk, &mut col[k..]);
                }
            }
            v.push(vk);
            beta.push(bk);
        }
        let r = cols
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut rc = vec![0.0; n];
                rc[..=j].copy_from_slice(&c[..=j]);
                rc
            })
            .collect();
        Self { m, v, beta, r }
    }

    /// `Qᵀ y` for one column of length `m`.
    fn apply_qt(&self, y: &mut [f64]) {
        for (k, (vk, &bk)) in self.v.iter().zip(&self.beta).enumerate() {
            if bk != 0.0 {
                reflect(vk, bk, &mut y[k..]);
            }
        }
    }

    /// `Q y` for one column of length `m`.
    fn apply_q(&self, y: &mut [f64]) {
        for (k, (vk, &bk)) in self.v.iter().zip(&self.beta).enumerate().rev() {
            if bk != 0.0 {
                reflect(vk, bk, &mut y[k..]);
            }
        }
    }
}

#[inline]
fn reflect(v: &[f64], beta: f64, y: &mut [f64]) {
    let dot: f64 = v.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let s = beta * dot;
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= s * vi;
    }
}

/// Thin SVD `R = U diag(sigma) Vᵀ` of a square matrix given as columns.
pub(crate) struct SmallSvd {
    /// Columns of `U`; zero for zero singular values.
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    /// Columns of `V`.
    pub v: Vec<Vec<f64>>,
}

/// One-sided Jacobi: rotate column pairs of `B = R V` until they are mutually
/// orthogonal, then read off `sigma_j = |b_j|`, `u_j = b_j / sigma_j`.
pub(crate) fn jacobi_svd(mut b: Vec<Vec<f64>>) -> SmallSvd {
    const MAX_SWEEPS: usize = 80;
    let n = b.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();
    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (bp, bq) = (&b[p], &b[q]);
                    let mut a = 0.0;
                    let mut bb = 0.0;
                    let mut g = 0.0;
                    for (x, y) in bp.iter().zip(bq) {
                        a += x * x;
                        bb += y * y;
                        g += x * y;
                    }
                    (a, bb, g)
                };
                if gamma == 0.0 || gamma.abs() <= eps * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::hypot(1.0, zeta));
                let c = 1.0 / math::hypot(1.0, t);
                let s = c * t;
                rotate(&mut b, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for col in b {
        let s = math::sqrt(col.iter().map(|x| x * x).sum());
        sigma.push(s);
        if s > 0.0 {
            u.push(col.iter().map(|x| x / s).collect());
        } else {
            u.push(vec![0.0; col.len()]);
        }
    }
    SmallSvd { u, sigma, v }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (bp, bq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in bp.iter_mut().zip(bq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// `A⁺ Y` for `A` (`m x d`) and `Y` (`m x c`), truncating singular values
/// below `rcond * sigma_max`. Returns `d x c`.
pub(crate) fn pinv_solve(a: &Matrix, y: &Matrix, rcond: f64) -> Matrix {
    let (m, d) = a.shape();
    let c = y.cols();
    if m >= d {
        // A = Q R, A⁺ Y = V Σ⁺ Uᵀ (Qᵀ Y)[..d]
        let cols: Vec<Vec<f64>> = (0..d).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
        let qr = HouseholderQr::factor(cols, m);
        let svd = jacobi_svd(qr.r.clone());
        let keep = kept(&svd.sigma, rcond);
        let mut w = Matrix::zeros(d, c);
        for k in 0..c {
            let mut yk: Vec<f64> = (0..m).map(|i| y.get(i, k)).collect();
            qr.apply_qt(&mut yk);
            let top = &yk[..d];
            for j in 0..d {
                if !keep[j] {
                    continue;
                }
                let coef = dot(&svd.u[j], top) / svd.sigma[j];
                for (i, vij) in svd.v[j].iter().enumerate() {
                    let cur = w.get(i, k);
                    w.set(i, k, cur + coef * vij);
                }
            }
        }
        w
    } else {
        // Aᵀ = Q R, A = V Σ Uᵀ Qᵀ, A⁺ Y = Q U Σ⁺ Vᵀ Y
        let cols: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
        let qr = HouseholderQr::factor(cols, d);
        let svd = jacobi_svd(qr.r.clone());
        let keep = kept(&svd.sigma, rcond);
        let mut w = Matrix::zeros(d, c);
        for k in 0..c {
            let yk: Vec<f64> = (0..m).map(|i| y.get(i, k)).collect();
            let mut z = vec![0.0; d];
            for j in 0..m {
                if !keep[j] {
                    continue;
                }
                let coef = dot(&svd.v[j], &yk) / svd.sigma[j];
                for (zi, uij) in z[..m].iter_mut().zip(&svd.u[j]) {
                    *zi += coef * uij;
                }
            }
            qr.apply_q(&mut z);
            debug_assert_eq!(qr.m, d);
            for (i, zi) in z.into_iter().enumerate() {
                w.set(i, k, zi);
            }
        }
        w
    }
}

fn kept(sigma: &[f64], rcond: f64) -> Vec<bool> {
    let max = sigma.iter().copied().fold(0.0, f64::max);
    sigma.iter().map(|&s| max > 0.0 && s >= rcond * max).collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (m, d) = a.shape();
    let qr = if m >= d {
        HouseholderQr::factor((0..d).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect(), m)
    } else {
        HouseholderQr::factor((0..m).map(|i| a.row(i).to_vec()).collect(), d)
    };
    let mut s = jacobi_svd(qr.r).sigma;
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(svd: &SmallSvd) -> Matrix {
        let n = svd.sigma.len();
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let cur = m.get(i, j);
                    m.set(i, j, cur + svd.u[k][i] * svd.sigma[k] * svd.v[k][j]);
                }
            }
        }
        m
    }

    #[test]
    fn jacobi_reconstructs() {
        let r = Matrix::from_rows(&[[3.0, 1.0, 0.5], [0.0, 2.0, -1.0], [0.0, 0.0, 0.25]]);
        let cols = (0..3).map(|j| (0..3).map(|i| r.get(i, j)).collect()).collect();
        let svd = jacobi_svd(cols);
        assert!(reconstruct(&svd).max_abs_diff(&r) < 1e-13);
    }

    #[test]
    fn qr_roundtrip() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -1.0, 2.0, 0.0]];
        let qr = HouseholderQr::factor(cols.clone(), 4);
        for (j, col) in cols.iter().enumerate() {
            let mut y = vec![0.0; 4];
            y[..2].copy_from_slice(&qr.r[j]);
            qr.apply_q(&mut y);
            for (a, b) in y.iter().zip(col) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_values_of_diag() {
        let a = Matrix::from_rows(&[[0.0, 2.0], [3.0, 0.0], [0.0, 0.0]]);
        let s = singular_values(&a);
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
    }
}
