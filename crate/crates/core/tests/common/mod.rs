//! Shared test oracles, independent of the library's linear-algebra path.
//!
//! The SVD oracle is a one-sided Jacobi rotation scheme and the symmetric
//! eigensolver a cyclic two-sided Jacobi scheme; both touch nothing but raw
//! loops over `DMatrix` entries, so they cannot share a failure mode with
//! the nalgebra-backed implementations they are used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Full SVD by one-sided Jacobi: orthogonalize the columns of `a` by plane
/// rotations; column norms become the singular values.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n, "one-sided jacobi oracle expects rows >= cols; transpose first");
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    alpha += w[(i, p)] * w[(i, p)];
                    beta += w[(i, q)] * w[(i, q)];
                    gamma += w[(i, p)] * w[(i, q)];
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if off < eps {
            break;
        }
    }
    // Column norms are the singular values; normalize the left vectors.
    let mut triples: Vec<(f64, usize)> = (0..n).map(|j| (w.column(j).norm(), j)).collect();
    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut u = DMatrix::zeros(m, n);
    let mut vv = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &(s, j)) in triples.iter().enumerate() {
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, dst)] = w[(i, j)] / s;
            }
        }
        for i in 0..n {
            vv[(i, dst)] = v[(i, j)];
        }
    }
    (u, sigma, vv)
}

/// Symmetric eigendecomposition by cyclic two-sided Jacobi. Returns
/// (eigenvalues sorted descending, matching eigenvectors as columns).
pub fn jacobi_eigen_sym(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() < 1e-13 * (1.0 + m.norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)], i)).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &(lambda, src)) in pairs.iter().enumerate() {
        vals.push(lambda);
        for i in 0..n {
            vecs[(i, dst)] = v[(i, src)];
        }
    }
    (vals, vecs)
}

/// Least squares through explicitly formed normal equations, solved by
/// unpivoted Gaussian elimination. Requires a full-rank design.
pub fn normal_equations_ols(design: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = design.tr_mul(design);
    let xty = design.tr_mul(y);
    gaussian_solve(&xtx, &xty)
}

fn gaussian_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[(row, col)].abs() > m[(pivot, col)].abs() {
                pivot = row;
            }
        }
        assert!(m[(pivot, col)].abs() > 1e-12, "oracle: singular normal equations");
        if pivot != col {
            m.swap_rows(pivot, col);
            rhs.swap_rows(pivot, col);
        }
        for row in (col + 1)..n {
            let f = m[(row, col)] / m[(col, col)];
            for c in col..n {
                m[(row, c)] -= f * m[(col, c)];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = DVector::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..n {
            acc -= m[(row, c)] * x[c];
        }
        x[row] = acc / m[(row, row)];
    }
    x
}

/// Projector onto the column span via the normal equations
/// `M (M'M)^{-1} M'`.
pub fn normal_equations_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = m.tr_mul(m);
    let inv = gram.try_inverse().expect("oracle: gram matrix invertible");
    m * inv * m.transpose()
}

/// Kolmogorov-Smirnov statistic of `samples` against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f);
        d = d.max(f - i as f64 / n);
    }
    d
}

/// Dense standard-Gaussian matrix from a seed.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random symmetric matrix with distinct-ish eigenvalues.
pub fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, seed);
    (&g + g.transpose()) * 0.5
}
