//! Small dense symmetric linear algebra over row-major `Vec<S>` buffers.
//!
//! Hybrid potentials only ever carry a handful of continuous dimensions, so
//! these routines favour clarity over blocking or SIMD.

use crate::scalar::Real;

#[inline]
pub fn at<S: Copy>(m: &[S], n: usize, i: usize, j: usize) -> S {
    m[i * n + j]
}

pub fn identity<S: Real>(n: usize) -> Vec<S> {
    let mut m = vec![S::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = S::one();
    }
    m
}

pub fn symmetrize<S: Real>(m: &mut [S], n: usize) {
    let half = S::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[i * n + j] + m[j * n + i]) * half;
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
}

pub fn mat_vec<S: Real>(m: &[S], n: usize, v: &[S]) -> Vec<S> {
    (0..n)
        .map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum())
        .collect()
}

pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Lower-triangular Cholesky factor, or `None` when `m` is not numerically
/// positive definite.
pub fn cholesky<S: Real>(m: &[S], n: usize) -> Option<Vec<S>> {
    let scale = (0..n)
        .map(|i| m[i * n + i].abs())
        .fold(S::zero(), |a, b| a.max(b));
    let floor = scale * S::epsilon() * S::lit(64.0);
    let mut l = vec![S::zero(); n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = b` given the Cholesky factor.
pub fn chol_solve<S: Real>(l: &[S], n: usize, b: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

pub fn chol_logdet<S: Real>(l: &[S], n: usize) -> S {
    (0..n).map(|i| l[i * n + i].ln()).sum::<S>() * S::lit(2.0)
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
pub fn spd_inverse<S: Real>(m: &[S], n: usize) -> Option<(Vec<S>, S)> {
    let l = cholesky(m, n)?;
    let mut inv = vec![S::zero(); n * n];
    let mut e = vec![S::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = S::zero());
        e[j] = S::one();
        let col = chol_solve(&l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    symmetrize(&mut inv, n);
    Some((inv, chol_logdet(&l, n)))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues and row-major eigenvectors (column `k` pairs with value `k`).
pub fn sym_eigen<S: Real>(m: &[S], n: usize) -> (Vec<S>, Vec<S>) {
    let mut a = m.to_vec();
    symmetrize(&mut a, n);
    let mut v = identity::<S>(n);
    let two = S::lit(2.0);
    for _sweep in 0..64 {
        let off: S = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: S = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= S::epsilon() * S::epsilon() * (diag + off) || off == S::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == S::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
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
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Symmetrize and clamp slightly negative eigenvalues (≥ −tol·‖m‖) to zero.
/// Returns `None` if an eigenvalue is more negative than the tolerance.
pub fn clamp_psd<S: Real>(m: &[S], n: usize) -> Option<Vec<S>> {
    let mut out = m.to_vec();
    symmetrize(&mut out, n);
    if n == 0 {
        return Some(out);
    }
    let (vals, vecs) = sym_eigen(&out, n);
    let norm = vals.iter().fold(S::zero(), |a, b| a.max(b.abs()));
    let tol = S::psd_tol() * norm;
    if vals.iter().any(|&v| v < -tol) {
        return None;
    }
    if vals.iter().all(|&v| v >= S::zero()) {
        return Some(out);
    }
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n)
                .map(|k| vecs[i * n + k] * vals[k].max(S::zero()) * vecs[j * n + k])
                .sum();
        }
    }
    symmetrize(&mut out, n);
    Some(out)
}
