//! Ordered real Schur decomposition.
//!
//! nalgebra supplies the unordered real Schur form; this module standardizes
//! the quasi-triangular factor (2x2 blocks with real eigenvalues are split
//! into 1x1 blocks) and then reorders diagonal blocks with orthogonal swaps
//! so that a chosen part of the spectrum occupies the leading block. The
//! leading Schur vectors then span the corresponding invariant subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which part of the spectrum is rotated to the leading block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumPart {
    /// Eigenvalues with |z| < 1.
    InsideUnitDisk,
    /// Eigenvalues with |z| > 1.
    OutsideUnitDisk,
}

/// Q and T with Q orthogonal, T quasi-upper-triangular and Q^T A Q = T;
/// the selected eigenvalues occupy the leading `selected_dim` rows of T.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub selected_dim: usize,
    /// Eigenvalues as (re, im), in the diagonal-block order of T.
    pub eigenvalues: Vec<(f64, f64)>,
}

const SCHUR_MAX_ITER: usize = 200;

/// Diagonal block sizes of a quasi-triangular T, reading top-left down.
fn block_sizes(t: &DMatrix<f64>, subdiag_tol: f64) -> Vec<usize> {
    let n = t.nrows();
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > subdiag_tol {
            sizes.push(2);
            i += 2;
        } else {
            sizes.push(1);
            i += 1;
        }
    }
    sizes
}

fn subdiag_tol(t: &DMatrix<f64>) -> f64 {
    let scale = t.abs().max().max(1.0);
    scale * 1e-13
}

/// Eigenvalues of a diagonal block starting at `i` with size 1 or 2.
fn block_eigenvalues(t: &DMatrix<f64>, i: usize, size: usize) -> [(f64, f64); 2] {
    if size == 1 {
        return [(t[(i, i)], 0.0), (f64::NAN, f64::NAN)];
    }
    let a = t[(i, i)];
    let b = t[(i, i + 1)];
    let c = t[(i + 1, i)];
    let d = t[(i + 1, i + 1)];
    let tr = a + d;
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [((tr + s) / 2.0, 0.0), ((tr - s) / 2.0, 0.0)]
    } else {
        let s = (-disc).sqrt() / 2.0;
        [(tr / 2.0, s), (tr / 2.0, -s)]
    }
}

/// Applies a Givens rotation G(c, s) acting on rows/cols (i, i+1) as an
/// orthogonal similarity T <- G^T T G, accumulating Q <- Q G.
fn apply_rotation(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, c: f64, s: f64) {
    let n = t.nrows();
    for k in 0..n {
        let x = t[(i, k)];
        let y = t[(i + 1, k)];
        t[(i, k)] = c * x + s * y;
        t[(i + 1, k)] = -s * x + c * y;
    }
    for k in 0..n {
        let x = t[(k, i)];
        let y = t[(k, i + 1)];
        t[(k, i)] = c * x + s * y;
        t[(k, i + 1)] = -s * x + c * y;
    }
    for k in 0..q.nrows() {
        let x = q[(k, i)];
        let y = q[(k, i + 1)];
        q[(k, i)] = c * x + s * y;
        q[(k, i + 1)] = -s * x + c * y;
    }
}

/// Splits every 2x2 diagonal block with real eigenvalues into two 1x1 blocks
/// using a Givens rotation aligned with one real eigenvector.
fn standardize(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>) {
    let n = t.nrows();
    let tol = subdiag_tol(t);
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)].abs() <= tol {
            t[(i + 1, i)] = 0.0;
            i += 1;
            continue;
        }
        let [l1, _l2] = block_eigenvalues(t, i, 2);
        if l1.1 != 0.0 {
            // Complex pair: leave the block alone.
            i += 2;
            continue;
        }
        // Real eigenvalues: rotate so that an eigenvector of the block for
        // l1 becomes e1 of the block.
        let a = t[(i, i)];
        let b = t[(i, i + 1)];
        let c2 = t[(i + 1, i)];
        let lam = l1.0;
        // (A - lam I) v = 0 within the 2x2 block.
        let (vx, vy) = if b.abs() + (lam - a).abs() > c2.abs() + (lam - t[(i + 1, i + 1)]).abs() {
            (b, lam - a)
        } else {
            (lam - t[(i + 1, i + 1)], c2)
        };
        let norm = (vx * vx + vy * vy).sqrt();
        if norm == 0.0 {
            i += 2;
            continue;
        }
        let (c, s) = (vx / norm, vy / norm);
        apply_rotation(t, q, i, c, s);
        t[(i + 1, i)] = 0.0;
        i += 1;
    }
}

/// Extends the orthonormal columns of `w` (m x k) to a full m x m orthogonal
/// matrix by appending standard basis vectors, Gram-Schmidt with fixed order.
fn complete_orthogonal(w: &DMatrix<f64>) -> DMatrix<f64> {
    let m = w.nrows();
    let k = w.ncols();
    let mut cols: Vec<DVector<f64>> = (0..k).map(|j| w.column(j).into_owned()).collect();
    for e in 0..m {
        if cols.len() == m {
            break;
        }
        let mut v = DVector::zeros(m);
        v[e] = 1.0;
        for _ in 0..2 {
            for qcol in &cols {
                let c = qcol.dot(&v);
                v -= qcol * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    let mut out = DMatrix::zeros(m, m);
    for (j, cvec) in cols.iter().enumerate() {
        out.set_column(j, cvec);
    }
    out
}

/// Swaps two adjacent diagonal blocks of sizes p and r starting at row `i`,
/// via the Sylvester-equation construction: the invariant subspace of the
/// trailing block is rotated to the front with an orthogonal transform.
fn swap_blocks(
    t: &mut DMatrix<f64>,
    q: &mut DMatrix<f64>,
    i: usize,
    p: usize,
    r: usize,
) -> Result<()> {
    let m = p + r;
    let a = t.view((i, i), (p, p)).into_owned();
    let b = t.view((i + p, i + p), (r, r)).into_owned();
    let c = t.view((i, i + p), (p, r)).into_owned();
    // Solve A X - X B = -C via the Kronecker system.
    let mut k_mat = DMatrix::<f64>::zeros(p * r, p * r);
    let mut rhs = DVector::<f64>::zeros(p * r);
    // vec ordering: X[(u, v)] -> index v * p + u (column-major).
    for v in 0..r {
        for u in 0..p {
            let row = v * p + u;
            for w in 0..p {
                k_mat[(row, v * p + w)] += a[(u, w)];
            }
            for w in 0..r {
                k_mat[(row, w * p + u)] -= b[(w, v)];
            }
            rhs[row] = -c[(u, v)];
        }
    }
    let lu = k_mat.lu();
    let x_vec = lu.solve(&rhs).ok_or_else(|| {
        Error::InvalidInput("Sylvester system singular during Schur reordering".into())
    })?;
    let mut x = DMatrix::<f64>::zeros(p, r);
    for v in 0..r {
        for u in 0..p {
            x[(u, v)] = x_vec[v * p + u];
        }
    }
    // Columns of [X; I] span the invariant subspace of the trailing block.
    let mut w = DMatrix::<f64>::zeros(m, r);
    for v in 0..r {
        for u in 0..p {
            w[(u, v)] = x[(u, v)];
        }
        w[(p + v, v)] = 1.0;
    }
    // Orthonormalize the r columns, then complete to an m x m orthogonal Z.
    let qr = w.qr();
    let w_orth = qr.q();
    let z = complete_orthogonal(&w_orth);
    // Apply the similarity on the window.
    let n = t.nrows();
    let mut t_rows = t.view((i, 0), (m, n)).into_owned();
    t_rows = z.transpose() * t_rows;
    t.view_mut((i, 0), (m, n)).copy_from(&t_rows);
    let mut t_cols = t.view((0, i), (n, m)).into_owned();
    t_cols *= &z;
    t.view_mut((0, i), (n, m)).copy_from(&t_cols);
    let mut q_cols = q.view((0, i), (q.nrows(), m)).into_owned();
    q_cols *= &z;
    q.view_mut((0, i), (q.nrows(), m)).copy_from(&q_cols);
    // Window is now [[B', *], [~0, A']]; zero the negligible lower-left part.
    for u in 0..p {
        for v in 0..r {
            t[(i + r + u, i + v)] = 0.0;
        }
    }
    // A freshly swapped 2x2 block with real eigenvalues is re-split later by
    // the caller through standardize().
    Ok(())
}

/// Modulus of the eigenvalue(s) of the block at `i` (complex pairs share one).
fn block_modulus(t: &DMatrix<f64>, i: usize, size: usize) -> f64 {
    if size == 1 {
        t[(i, i)].abs()
    } else {
        // Complex pair z, conj(z): |z|^2 = det(block).
        let det = t[(i, i)] * t[(i + 1, i + 1)] - t[(i, i + 1)] * t[(i + 1, i)];
        det.abs().sqrt()
    }
}

/// Computes the ordered real Schur form of `a`, with the eigenvalues in the
/// requested part of the spectrum occupying the leading block of T.
pub fn ordered_schur(a: &DMatrix<f64>, part: SpectrumPart) -> Result<OrderedSchur> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "ordered_schur requires a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-15, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::InvalidInput("Schur iteration did not converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    standardize(&mut t, &mut q);

    let selected = |modulus: f64| match part {
        SpectrumPart::InsideUnitDisk => modulus < 1.0,
        SpectrumPart::OutsideUnitDisk => modulus > 1.0,
    };

    // Bubble selected blocks to the front with adjacent swaps.
    loop {
        let sizes = block_sizes(&t, subdiag_tol(&t));
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for s in &sizes {
            offsets.push(off);
            off += s;
        }
        let mut swapped = false;
        for bi in 0..sizes.len().saturating_sub(1) {
            let (i, p, r) = (offsets[bi], sizes[bi], sizes[bi + 1]);
            let first_sel = selected(block_modulus(&t, i, p));
            let second_sel = selected(block_modulus(&t, i + p, r));
            if !first_sel && second_sel {
                swap_blocks(&mut t, &mut q, i, p, r)?;
                standardize(&mut t, &mut q);
                swapped = true;
                break;
            }
        }
        if !swapped {
            break;
        }
    }

    // Collect eigenvalues and the selected dimension from the final order.
    let sizes = block_sizes(&t, subdiag_tol(&t));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut selected_dim = 0;
    let mut i = 0;
    for s in sizes {
        let eigs = block_eigenvalues(&t, i, s);
        if selected(block_modulus(&t, i, s)) {
            selected_dim += s;
        }
        eigenvalues.push(eigs[0]);
        if s == 2 {
            eigenvalues.push(eigs[1]);
        }
        i += s;
    }
    Ok(OrderedSchur {
        q,
        t,
        selected_dim,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reconstruct(s: &OrderedSchur) -> DMatrix<f64> {
        &s.q * &s.t * s.q.transpose()
    }

    #[test]
    fn diagonal_matrix_orders_stable_first() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let s = ordered_schur(&a, SpectrumPart::InsideUnitDisk).unwrap();
        assert_eq!(s.selected_dim, 1);
        assert_abs_diff_eq!(s.t[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.t[(1, 1)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!((reconstruct(&s) - &a).abs().max(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_pair_block_is_kept_together() {
        // Rotation scaled by 0.5: complex pair of modulus 0.5, plus eigenvalue 3.
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.2, 0.0, 0.0, -0.5, 0.0, 0.5, 0.0]);
        let s = ordered_schur(&a, SpectrumPart::InsideUnitDisk).unwrap();
        assert_eq!(s.selected_dim, 2);
        assert_abs_diff_eq!((reconstruct(&s) - &a).abs().max(), 0.0, epsilon = 1e-10);
        // Leading invariant subspace check: A Q1 = Q1 T11.
        let q1 = s.q.view((0, 0), (3, 2)).into_owned();
        let t11 = s.t.view((0, 0), (2, 2)).into_owned();
        assert_abs_diff_eq!((&a * &q1 - &q1 * &t11).abs().max(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn random_similarity_orders_correctly() {
        // diag(0.3, 1.7, 0.8, -2.5) conjugated by a fixed non-orthogonal S.
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.3, 1.7, 0.8, -2.5]));
        let s_mat = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.3, -0.2, 0.5, 0.0, 1.0, 0.4, -0.1, 0.2, 0.0, 1.0, 0.3, -0.3, 0.2, 0.0, 1.0,
            ],
        );
        let a = &s_mat * d * s_mat.clone().try_inverse().unwrap();
        let s = ordered_schur(&a, SpectrumPart::InsideUnitDisk).unwrap();
        assert_eq!(s.selected_dim, 2);
        let q1 = s.q.view((0, 0), (4, 2)).into_owned();
        let t11 = s.t.view((0, 0), (2, 2)).into_owned();
        assert_abs_diff_eq!((&a * &q1 - &q1 * &t11).abs().max(), 0.0, epsilon = 1e-9);
        // Leading eigenvalues all inside the unit disk.
        for i in 0..2 {
            assert!(s.t[(i, i)].abs() < 1.0);
        }
    }

    #[test]
    fn outside_ordering_selects_unstable_part() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 2.0]);
        let s = ordered_schur(&a, SpectrumPart::OutsideUnitDisk).unwrap();
        assert_eq!(s.selected_dim, 1);
        assert_abs_diff_eq!(s.t[(0, 0)], 2.0, epsilon = 1e-12);
    }
}
