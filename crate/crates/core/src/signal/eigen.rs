//! Eigendecomposition of small Hermitian matrices.
//!
//! `R = A + iB` is embedded as the real symmetric matrix `[[A, -B], [B, A]]`,
//! diagonalized with cyclic Jacobi rotations. Every eigenvalue of `R`
//! appears twice in the embedding, once for `v` and once for `i v`, so
//! complex eigenvectors are picked greedily with Gram-Schmidt.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

const MAX_SWEEPS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<Complex64>>,
}

/// Eigenpairs of the `n x n` Hermitian matrix stored row-major in `m`.
pub fn hermitian_eigen(n: usize, m: &[Complex64]) -> HermitianEigen {
    assert_eq!(m.len(), n * n, "matrix must be n x n");
    let size = 2 * n;
    let mut a = vec![0.0; size * size];
    for i in 0..n {
        for j in 0..n {
            let z = m[i * n + j];
            a[i * size + j] = z.re;
            a[(i + n) * size + j + n] = z.re;
            a[i * size + j + n] = -z.im;
            a[(i + n) * size + j] = z.im;
        }
    }
    let (values, vectors) = jacobi(size, &mut a);

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));

    let mut out_vals = Vec::with_capacity(n);
    let mut out_vecs: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in order {
        if out_vecs.len() == n {
            break;
        }
        let mut v: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(vectors[i * size + k], vectors[(i + n) * size + k])).collect();
        for u in &out_vecs {
            let proj: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        // Columns of the orthogonal Jacobi basis have unit norm, so a genuinely
        // new direction keeps at least half of it.
        if norm < 0.5 {
            continue;
        }
        for z in &mut v {
            *z /= norm;
        }
        out_vals.push(rayleigh_quotient(n, m, &v));
        out_vecs.push(v);
    }
    let mut idx: Vec<usize> = (0..out_vals.len()).collect();
    idx.sort_by(|&x, &y| out_vals[x].total_cmp(&out_vals[y]));
    HermitianEigen {
        values: idx.iter().map(|&i| out_vals[i]).collect(),
        vectors: idx.iter().map(|&i| out_vecs[i].clone()).collect(),
    }
}

fn rayleigh_quotient(n: usize, m: &[Complex64], v: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let row: Complex64 = (0..n).map(|j| m[i * n + j] * v[j]).sum();
        acc += v[i].conj() * row;
    }
    acc.re
}

/// Cyclic Jacobi on a symmetric matrix; returns the diagonal and the
/// eigenvectors as columns of a row-major matrix.
fn jacobi(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-30 * scale || off == 0.0 {
            break;
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
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
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
