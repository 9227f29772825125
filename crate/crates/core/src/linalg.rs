//! Dense linear-algebra kernels and subspace geometry shared by all other
//! modules.
//!
//! Matrices are `nalgebra::DMatrix<f64>` throughout. [`Subspace`] and
//! [`Projector`] wrap a validated orthonormal basis / orthogonal projection
//! matrix; downstream code compares subspaces only through projectors, which
//! are invariant to the sign and rotation ambiguity of eigenvector bases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entrywise tolerance for `basis' * basis = I`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Frobenius tolerance for projector idempotence `P^2 = P`.
pub const IDEMPOTENCE_TOL: f64 = 1e-8;
/// Entrywise tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Tolerance for comparisons against independent oracles in tests.
pub const ORACLE_TOL: f64 = 1e-8;

fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

/// A d-dimensional linear subspace of `R^ambient`, stored as a
/// column-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a column-orthonormal matrix. Fails if the columns are not
    /// orthonormal to [`ORTHONORMALITY_TOL`].
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&basis, "subspace basis")?;
        if basis.ncols() > basis.nrows() {
            return Err(Error::InvalidInput(format!(
                "subspace dimension {} exceeds ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        if basis.ncols() == 0 {
            return Err(Error::InvalidInput("subspace must have dimension >= 1".into()));
        }
        let gram = basis.tr_mul(&basis);
        let dim = basis.ncols();
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > ORTHONORMALITY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "basis is not orthonormal: |(B'B)[{i},{j}] - {target}| = {:e}",
                        (gram[(i, j)] - target).abs()
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The orthogonal projector `B * B'` onto this subspace.
    pub fn projector(&self) -> Projector {
        Projector {
            matrix: &self.basis * self.basis.transpose(),
            rank: self.dim(),
        }
    }
}

/// A symmetric idempotent matrix projecting onto a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl Projector {
    /// Validates symmetry, idempotence, and an (almost) integer trace.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&matrix, "projector")?;
        if !matrix.is_square() {
            return Err(Error::InvalidInput("projector must be square".into()));
        }
        let sym_err = max_abs_asymmetry(&matrix);
        if sym_err > SYMMETRY_TOL {
            return Err(Error::InvalidInput(format!(
                "projector is not symmetric: max |P - P'| = {sym_err:e}"
            )));
        }
        let idem_err = (&matrix * &matrix - &matrix).norm();
        if idem_err > IDEMPOTENCE_TOL {
            return Err(Error::InvalidInput(format!(
                "projector is not idempotent: |P^2 - P|_F = {idem_err:e}"
            )));
        }
        let trace = matrix.trace();
        let rank = trace.round();
        if (trace - rank).abs() > IDEMPOTENCE_TOL || rank < 0.0 {
            return Err(Error::InvalidInput(format!(
                "projector trace {trace} is not a non-negative integer"
            )));
        }
        Ok(Self { matrix, rank: rank as usize })
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

fn max_abs_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Top-k singular triplets of a matrix; `singular_values` are sorted
/// non-increasing and `u`, `v` are column-orthonormal.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    /// `u * diag(s) * v'`, the best rank-k approximation of the input.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        scaled * self.v.transpose()
    }
}

/// Flips column signs so the largest-magnitude coordinate of each column of
/// `primary` is positive; `paired` columns are flipped in tandem so products
/// like `u * s * v'` are preserved. Ties on magnitude pick the lowest index.
fn fix_column_signs(primary: &mut DMatrix<f64>, mut paired: Option<&mut DMatrix<f64>>) {
    for j in 0..primary.ncols() {
        let mut best_idx = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..primary.nrows() {
            let mag = primary[(i, j)].abs();
            if mag > best_mag {
                best_mag = mag;
                best_idx = i;
            }
        }
        if primary[(best_idx, j)] < 0.0 {
            for i in 0..primary.nrows() {
                primary[(i, j)] = -primary[(i, j)];
            }
            if let Some(p) = paired.as_deref_mut() {
                for i in 0..p.nrows() {
                    p[(i, j)] = -p[(i, j)];
                }
            }
        }
    }
}

/// Leading `k` singular triplets of `m`.
///
/// Signs are fixed by the largest-magnitude-coordinate-positive rule applied
/// to the left vectors, with right vectors flipped in tandem.
pub fn thin_svd(m: &DMatrix<f64>, k: usize) -> Result<SvdResult> {
    ensure_finite(m, "svd input")?;
    let max_k = m.nrows().min(m.ncols());
    if k == 0 || k > max_k {
        return Err(Error::InvalidInput(format!(
            "svd rank {k} out of range 1..={max_k} for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericFailure("svd did not converge".into()))?;
    let u_full = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let s = svd.singular_values;

    // nalgebra sorts, but make the ordering explicit; ties keep index order.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("finite singular values"));

    let mut u = DMatrix::zeros(m.nrows(), k);
    let mut v = DMatrix::zeros(m.ncols(), k);
    let mut sv = DVector::zeros(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        u.set_column(dst, &u_full.column(src));
        v.set_column(dst, &v_t.row(src).transpose());
        sv[dst] = s[src];
    }
    fix_column_signs(&mut u, Some(&mut v));
    Ok(SvdResult { u, singular_values: sv, v })
}

/// Span of the `k` eigenvectors of a symmetric matrix with the largest
/// eigenvalues (by value, not magnitude).
pub fn top_eigvecs_sym(m: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    ensure_finite(m, "eigendecomposition input")?;
    if !m.is_square() {
        return Err(Error::InvalidInput("eigendecomposition input must be square".into()));
    }
    let asym = max_abs_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric: max |M - M'| = {asym:e}"
        )));
    }
    if k == 0 || k > m.nrows() {
        return Err(Error::InvalidInput(format!(
            "eigenvector count {k} out of range 1..={}",
            m.nrows()
        )));
    }
    // Symmetrize exactly before factorizing so tiny asymmetries cannot leak
    // into the eigenvectors.
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericFailure("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let mut basis = DMatrix::zeros(m.nrows(), k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut basis, None);
    Subspace::new(basis)
}

/// Eigenvalues of a symmetric matrix, sorted non-increasing.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    ensure_finite(m, "eigenvalue input")?;
    let asym = max_abs_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric: max |M - M'| = {asym:e}"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericFailure("symmetric eigendecomposition did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(DVector::from_vec(vals))
}

/// `trace(P1 * P2)`, the squared-cosine overlap of two subspaces.
///
/// Ranges over `[0, min(rank1, rank2)]`; equals the common rank iff the
/// subspaces coincide.
pub fn alignment(p1: &Projector, p2: &Projector) -> Result<f64> {
    if p1.ambient_dim() != p2.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "projector ambient dims differ: {} vs {}",
            p1.ambient_dim(),
            p2.ambient_dim()
        )));
    }
    // Both symmetric, so trace(P1 P2) is the entrywise dot product.
    Ok(p1.matrix().iter().zip(p2.matrix().iter()).map(|(a, b)| a * b).sum())
}

/// Orthonormal basis of the column span of `m` (thin QR with positive
/// R-diagonal sign convention).
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<Subspace> {
    ensure_finite(m, "orthonormalization input")?;
    if m.ncols() == 0 || m.ncols() > m.nrows() {
        return Err(Error::InvalidInput(format!(
            "cannot orthonormalize {} columns in ambient dimension {}",
            m.ncols(),
            m.nrows()
        )));
    }
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let tol = 1e-10 * m.norm();
    for i in 0..m.ncols() {
        let rii = r[(i, i)];
        if rii.abs() <= tol {
            return Err(Error::DegenerateInput(format!(
                "columns are linearly dependent to tolerance (|R[{i},{i}]| = {:e})",
                rii.abs()
            )));
        }
        if rii < 0.0 {
            for row in 0..q.nrows() {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Subspace::new(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    #[test]
    fn thin_svd_of_diagonal() {
        let m = diag(&[3.0, 2.0, 1.0]);
        let out = thin_svd(&m, 2).unwrap();
        assert_abs_diff_eq!(out.singular_values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.singular_values[1], 2.0, epsilon = 1e-12);
        // Columns are +/- e1, +/- e2; projector comparison is sign-free.
        let pu = Subspace::new(out.u.clone()).unwrap().projector();
        let expect = diag(&[1.0, 1.0, 0.0]);
        assert!((pu.matrix() - expect).norm() < 1e-10);
    }

    #[test]
    fn thin_svd_rank_one() {
        let a = DVector::from_row_slice(&[0.6, 0.0, 0.8]);
        let b = DVector::from_row_slice(&[0.8, 0.6]);
        let m = &a * b.transpose();
        let out = thin_svd(&m, 1).unwrap();
        assert_abs_diff_eq!(out.singular_values[0], 1.0, epsilon = 1e-12);
        assert!((out.u.column(0).abs() - a.abs()).norm() < 1e-10);
        assert!((out.v.column(0).abs() - b.abs()).norm() < 1e-10);
        assert!((out.reconstruct() - &m).norm() < 1e-10);
    }

    #[test]
    fn thin_svd_rejects_bad_input() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(thin_svd(&m, 1), Err(Error::InvalidInput(_))));
        let m = DMatrix::<f64>::identity(3, 2);
        assert!(matches!(thin_svd(&m, 3), Err(Error::InvalidInput(_))));
        assert!(matches!(thin_svd(&m, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn top_eigvecs_of_diagonal() {
        let m = diag(&[5.0, 4.0, 1.0]);
        let s = top_eigvecs_sym(&m, 2).unwrap();
        let expect = diag(&[1.0, 1.0, 0.0]);
        assert!((s.projector().matrix() - expect).norm() < 1e-10);
    }

    #[test]
    fn top_eigvecs_of_projector_recovers_it() {
        // Rank-2 projector in R^4 spanning two fixed directions.
        let b = orthonormalize(&DMatrix::from_column_slice(4, 2, &[
            1.0, 1.0, 0.0, 1.0, //
            0.0, 1.0, 1.0, -1.0,
        ]))
        .unwrap();
        let p = b.projector();
        let s = top_eigvecs_sym(p.matrix(), 2).unwrap();
        assert!((s.projector().matrix() - p.matrix()).norm() <= 1e-8);
    }

    #[test]
    fn top_eigvecs_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(top_eigvecs_sym(&m, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn alignment_identical_and_orthogonal() {
        let s = orthonormalize(&DMatrix::from_column_slice(4, 2, &[
            1.0, 0.0, 2.0, 0.0, //
            0.0, 3.0, 0.0, 1.0,
        ]))
        .unwrap();
        let p = s.projector();
        assert_abs_diff_eq!(alignment(&p, &p).unwrap(), 2.0, epsilon = 1e-10);

        let e1 = Subspace::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let e2 = Subspace::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(
            alignment(&e1.projector(), &e2.projector()).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn alignment_is_squared_cosine() {
        // span{(cos t, sin t)} vs span{e1} has overlap cos^2 t; t = pi/3.
        let t = std::f64::consts::FRAC_PI_3;
        let dir = Subspace::new(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])).unwrap();
        let e1 = Subspace::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let got = alignment(&dir.projector(), &e1.projector()).unwrap();
        assert_abs_diff_eq!(got, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn alignment_dimension_mismatch() {
        let a = Subspace::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let b = Subspace::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            alignment(&a.projector(), &b.projector()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn orthonormalize_identity_and_hadamard() {
        let id = DMatrix::<f64>::identity(4, 3);
        let s = orthonormalize(&id).unwrap();
        assert!((s.basis() - &id).norm() < 1e-12);

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let s = orthonormalize(&m).unwrap();
        let gram = s.basis().tr_mul(s.basis());
        assert!((gram - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(orthonormalize(&m), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn projector_validation() {
        let good = diag(&[1.0, 1.0, 0.0]);
        let p = Projector::new(good).unwrap();
        assert_eq!(p.rank(), 2);

        let not_idem = diag(&[0.5, 1.0, 0.0]);
        assert!(Projector::new(not_idem).is_err());
    }

    #[test]
    fn subspace_rejects_non_orthonormal() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(Subspace::new(m).is_err());
    }
}
