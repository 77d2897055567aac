//! Dense linear-algebra kernels for small real matrices (N <~ 32).
//!
//! Everything here is deterministic: pivoting and orthonormalization break
//! ties by lowest index, so repeated runs produce bit-identical frames.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default tolerance for rank and intersection decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Orthonormal basis of a k-dimensional subspace of R^N.
#[derive(Debug, Clone)]
pub struct SubspaceFrame {
    ambient_dim: usize,
    /// N x k matrix whose columns are the basis vectors.
    basis: DMatrix<f64>,
    tol: f64,
}

impl SubspaceFrame {
    /// Builds a frame from columns already known to be orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>, tol: f64) -> Result<Self> {
        let frame = SubspaceFrame {
            ambient_dim: basis.nrows(),
            basis,
            tol,
        };
        let gram_err = frame.gram_deviation();
        if gram_err > tol {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal: Gram deviation {gram_err}"
            )));
        }
        Ok(frame)
    }

    pub fn empty(ambient_dim: usize, tol: f64) -> Self {
        SubspaceFrame {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
            tol,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Subspace dimension k.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.basis.column(j).into_owned()
    }

    /// Max deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let gram = self.basis.transpose() * &self.basis;
        let eye = DMatrix::<f64>::identity(self.dim(), self.dim());
        (gram - eye).abs().max()
    }

    /// Orthogonal projector onto the spanned subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Residual of `v` after orthogonal projection onto the frame.
    pub fn projection_residual(&self, v: &DVector<f64>) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm()
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("non-finite matrix entry".into()))
    }
}

/// Gram-Schmidt with fixed pivoting by input order. Columns whose residual
/// after projection onto the previous ones falls below `tol` are dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Result<SubspaceFrame> {
    if tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if vectors.is_empty() {
        return Ok(SubspaceFrame::empty(0, tol));
    }
    let n = vectors[0].len();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs ambient dim {}",
                v.len(),
                n
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        let mut w = v.clone();
        // Two rounds of classical Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&w);
                w -= q * c;
            }
        }
        let norm = w.norm();
        if norm >= tol {
            kept.push(w / norm);
        }
    }
    let k = kept.len();
    let mut basis = DMatrix::zeros(n, k);
    for (j, q) in kept.iter().enumerate() {
        basis.set_column(j, q);
    }
    Ok(SubspaceFrame {
        ambient_dim: n,
        basis,
        tol,
    })
}

/// Orthonormalizes the columns of a matrix (same pivoting rule as
/// [`orthonormalize`]).
pub fn orthonormalize_columns(m: &DMatrix<f64>, tol: f64) -> Result<SubspaceFrame> {
    let cols: Vec<DVector<f64>> = (0..m.ncols()).map(|j| m.column(j).into_owned()).collect();
    let mut frame = orthonormalize(&cols, tol)?;
    if m.ncols() == 0 {
        frame = SubspaceFrame::empty(m.nrows(), tol);
    }
    Ok(frame)
}

/// Orthonormal basis of the intersection of two subspaces, computed via
/// principal angles: singular values of F1^T F2 close to 1 flag shared
/// directions, and the corresponding left principal vectors mapped into F1
/// span the intersection.
pub fn subspace_intersection(
    f1: &SubspaceFrame,
    f2: &SubspaceFrame,
    tol: f64,
) -> Result<SubspaceFrame> {
    if !(0.0 < tol && tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "intersection tol must lie in (0, 1), got {tol}"
        )));
    }
    if f1.ambient_dim() != f2.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dims {} vs {}",
            f1.ambient_dim(),
            f2.ambient_dim()
        )));
    }
    let n = f1.ambient_dim();
    if f1.dim() == 0 || f2.dim() == 0 {
        return Ok(SubspaceFrame::empty(n, tol));
    }
    let cross = f1.basis().transpose() * f2.basis();
    let svd = cross.svd(true, false);
    let u = svd.u.as_ref().expect("svd with u requested");
    let mut vectors = Vec::new();
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > 1.0 - tol {
            let dir = f1.basis() * u.column(i).into_owned();
            vectors.push(dir);
        }
    }
    orthonormalize(&vectors, tol.min(DEFAULT_TOL)).map(|f| {
        if vectors.is_empty() {
            SubspaceFrame::empty(n, tol)
        } else {
            f
        }
    })
}

/// Smallest singular value of a rectangular matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let svd = m.clone().svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min))
}

/// Numerical null-space dimension: ncols minus the number of singular
/// values at or above `tol`. Handles rectangular matrices, where part of
/// the kernel is structural (ncols > nrows) and produces no small singular
/// value at all.
pub fn numerical_nullity(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let svd = m.clone().svd(false, false);
    let rank = svd.singular_values.iter().filter(|s| **s >= tol).count();
    Ok(m.ncols() - rank)
}

/// Sign of the determinant via LU with partial pivoting and pivot-sign
/// tracking. Returns 0 when the determinant, scaled by the row norms, is
/// smaller than `tol` (degenerate).
pub fn det_sign(m: &DMatrix<f64>, tol: f64) -> Result<i32> {
    check_finite(m)?;
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "det_sign requires a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        // Empty product: det of the 0x0 matrix is 1.
        return Ok(1);
    }
    let mut scale = 1.0f64;
    for i in 0..n {
        let row_norm = m.row(i).norm();
        if row_norm == 0.0 {
            return Ok(0);
        }
        scale *= row_norm;
    }
    let mut a = m.clone();
    let mut sign = 1i32;
    let mut log_det = 0.0f64;
    for col in 0..n {
        // Partial pivoting; ties broken by lowest row index.
        let mut pivot_row = col;
        let mut pivot_val = a[(col, col)].abs();
        for row in col + 1..n {
            let v = a[(row, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val == 0.0 {
            return Ok(0);
        }
        if pivot_row != col {
            a.swap_rows(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[(col, col)];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_det += pivot.abs().ln();
        for row in col + 1..n {
            let factor = a[(row, col)] / pivot;
            for k in col..n {
                a[(row, k)] -= factor * a[(col, k)];
            }
        }
    }
    // |det| / prod(row norms) < tol means we cannot trust the sign.
    if log_det - scale.ln() < tol.ln() {
        return Ok(0);
    }
    Ok(sign)
}

/// Determinant of a square matrix assembled from frame columns.
pub fn det(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput("det requires a square matrix".into()));
    }
    Ok(m.clone().lu().determinant())
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(entries)
    }

    #[test]
    fn orthonormalize_keeps_already_orthonormal_frame() {
        let frame = orthonormalize(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 1e-10).unwrap();
        assert_eq!(frame.dim(), 2);
        assert_abs_diff_eq!(frame.basis()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(frame.basis()[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_collapses_dependent_columns() {
        let frame = orthonormalize(&[v(&[2.0, 0.0]), v(&[4.0, 0.0])], 1e-10).unwrap();
        assert_eq!(frame.dim(), 1);
        assert_abs_diff_eq!(frame.basis()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_matches_hand_gram_schmidt() {
        let frame = orthonormalize(&[v(&[1.0, 1.0]), v(&[1.0, -1.0])], 1e-10).unwrap();
        assert_eq!(frame.dim(), 2);
        let s = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!(frame.basis()[(0, 0)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(frame.basis()[(1, 0)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(frame.basis()[(0, 1)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(frame.basis()[(1, 1)], -s, epsilon = 1e-14);
    }

    #[test]
    fn orthonormalize_empty_input_is_empty_frame() {
        let frame = orthonormalize(&[], 1e-10).unwrap();
        assert_eq!(frame.dim(), 0);
    }

    #[test]
    fn orthonormalize_rejects_non_finite() {
        assert!(orthonormalize(&[v(&[f64::NAN, 0.0])], 1e-10).is_err());
    }

    #[test]
    fn intersection_of_orthogonal_lines_is_trivial() {
        let f1 = orthonormalize(&[v(&[1.0, 0.0])], 1e-10).unwrap();
        let f2 = orthonormalize(&[v(&[0.0, 1.0])], 1e-10).unwrap();
        let cap = subspace_intersection(&f1, &f2, 1e-9).unwrap();
        assert_eq!(cap.dim(), 0);
    }

    #[test]
    fn intersection_of_identical_lines_is_the_line() {
        let f = orthonormalize(&[v(&[0.0, 1.0])], 1e-10).unwrap();
        let cap = subspace_intersection(&f, &f, 1e-9).unwrap();
        assert_eq!(cap.dim(), 1);
        assert_abs_diff_eq!(cap.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn intersection_at_theta_pi_recovers_vertical_line() {
        // Stable fiber (cos pi/2, sin pi/2) = (0, 1) meets span{(0,1)}.
        let half = std::f64::consts::FRAC_PI_2;
        let f1 = orthonormalize(&[v(&[half.cos(), half.sin()])], 1e-10).unwrap();
        let f2 = orthonormalize(&[v(&[0.0, 1.0])], 1e-10).unwrap();
        let cap = subspace_intersection(&f1, &f2, 1e-9).unwrap();
        assert_eq!(cap.dim(), 1);
        assert_abs_diff_eq!(cap.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn intersection_rejects_bad_tol() {
        let f = orthonormalize(&[v(&[1.0, 0.0])], 1e-10).unwrap();
        assert!(subspace_intersection(&f, &f, 1.5).is_err());
        assert!(subspace_intersection(&f, &f, 0.0).is_err());
    }

    #[test]
    fn min_singular_value_of_identity() {
        let m = DMatrix::<f64>::identity(2, 2);
        assert_abs_diff_eq!(min_singular_value(&m).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn min_singular_value_of_rank_deficient_diag() {
        let m = DMatrix::from_diagonal(&v(&[3.0, 0.0]));
        assert_abs_diff_eq!(min_singular_value(&m).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn min_singular_value_matches_hand_computation() {
        // Eigenvalues of M^T M for [[1,1],[0,1]] are (3 +- sqrt(5)) / 2.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let expected = ((3.0 - 5.0f64.sqrt()) / 2.0).sqrt();
        assert_abs_diff_eq!(min_singular_value(&m).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn det_sign_basics() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(det_sign(&id, 1e-12).unwrap(), 1);
        let neg = DMatrix::from_diagonal(&v(&[-1.0, 1.0]));
        assert_eq!(det_sign(&neg, 1e-12).unwrap(), -1);
        let perm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(det_sign(&perm, 1e-12).unwrap(), -1);
    }

    #[test]
    fn det_sign_flags_degenerate() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-15]);
        assert_eq!(det_sign(&m, 1e-12).unwrap(), 0);
    }

    #[test]
    fn det_sign_rejects_non_square() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(det_sign(&m, 1e-12).is_err());
    }

    #[test]
    fn min_singular_value_agrees_with_brute_force_in_2d() {
        let m = DMatrix::from_row_slice(2, 2, &[1.3, -0.4, 0.2, 0.9]);
        let sigma = min_singular_value(&m).unwrap();
        let mut brute = f64::INFINITY;
        let samples = 20000;
        for i in 0..samples {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / (samples as f64);
            let u = v(&[t.cos(), t.sin()]);
            brute = brute.min((&m * u).norm());
        }
        assert!(
            (sigma - brute).abs() < 1e-6,
            "sigma {sigma} vs brute {brute}"
        );
    }
}
