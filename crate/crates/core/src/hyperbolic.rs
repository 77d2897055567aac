//! Hyperbolicity tests and stable/unstable spectral splittings.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, spectral_norm, SubspaceFrame, DEFAULT_TOL};
use crate::schur::{ordered_schur, SpectrumPart};

/// Default spectral-gap tolerance: spectra closer to the unit circle than
/// this are rejected rather than split.
pub const DEFAULT_MARGIN_TOL: f64 = 1e-6;

/// Spectral splitting R^N = E^s(a) + E^u(a) of one hyperbolic matrix.
#[derive(Debug, Clone)]
pub struct HyperbolicSplitting {
    pub matrix: DMatrix<f64>,
    pub stable_frame: SubspaceFrame,
    pub unstable_frame: SubspaceFrame,
    /// Spectral projector onto E^s along E^u (oblique in general).
    pub stable_projector: DMatrix<f64>,
    /// Minimum over eigenvalues z of | |z| - 1 |.
    pub margin: f64,
    /// Eigenvalues as (re, im).
    pub eigenvalues: Vec<(f64, f64)>,
}

impl HyperbolicSplitting {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn stable_dim(&self) -> usize {
        self.stable_frame.dim()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable_frame.dim()
    }

    /// Complementary spectral projector onto E^u along E^s.
    pub fn unstable_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - &self.stable_projector
    }
}

/// Asymptotic limits of a coefficient sequence, with the measured tail.
#[derive(Debug, Clone)]
pub struct AsymptoticLimits {
    pub plus: HyperbolicSplitting,
    pub minus: HyperbolicSplitting,
    /// (m, sup_{|n| >= m} ||a_n - limit||) pairs, non-increasing in m.
    pub convergence_profile: Vec<(usize, f64)>,
}

/// Computes the stable/unstable splitting of a hyperbolic matrix via the
/// ordered real Schur form. Fails if any eigenvalue modulus is within
/// `margin_tol` of 1, or if the matrix is singular.
pub fn spectral_split(a: &DMatrix<f64>, margin_tol: f64) -> Result<HyperbolicSplitting> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "spectral_split requires a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let stable = ordered_schur(a, SpectrumPart::InsideUnitDisk)?;
    let mut margin = f64::INFINITY;
    for &(re, im) in &stable.eigenvalues {
        let modulus = (re * re + im * im).sqrt();
        if modulus < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "matrix is singular (eigenvalue modulus {modulus})"
            )));
        }
        let gap = (modulus - 1.0).abs();
        if gap <= margin_tol {
            return Err(Error::NotHyperbolic {
                modulus,
                tol: margin_tol,
            });
        }
        margin = margin.min(gap);
    }
    let k = stable.selected_dim;
    let unstable = ordered_schur(a, SpectrumPart::OutsideUnitDisk)?;
    debug_assert_eq!(unstable.selected_dim, n - k);

    let qs = stable.q.view((0, 0), (n, k)).into_owned();
    let qu = unstable.q.view((0, 0), (n, n - k)).into_owned();
    let stable_frame = orthonormalize_columns(&qs, DEFAULT_TOL)?;
    let unstable_frame = orthonormalize_columns(&qu, DEFAULT_TOL)?;
    if stable_frame.dim() != k || unstable_frame.dim() != n - k {
        return Err(Error::InvalidInput(
            "invariant subspace frames lost rank".into(),
        ));
    }

    // Spectral projector P^s = [Qs | Qu] diag(I_k, 0) [Qs | Qu]^{-1}.
    let mut basis = DMatrix::zeros(n, n);
    basis
        .view_mut((0, 0), (n, k))
        .copy_from(stable_frame.basis());
    basis
        .view_mut((0, k), (n, n - k))
        .copy_from(unstable_frame.basis());
    let inv = basis
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("stable and unstable frames do not span R^N".into()))?;
    let mut selector = DMatrix::zeros(n, n);
    for i in 0..k {
        selector[(i, i)] = 1.0;
    }
    let stable_projector = basis * selector * inv;

    Ok(HyperbolicSplitting {
        matrix: a.clone(),
        stable_frame,
        unstable_frame,
        stable_projector,
        margin,
        eigenvalues: stable.eigenvalues,
    })
}

/// True iff the stable dimensions of two hyperbolic matrices agree.
pub fn stable_dimensions_equal(a_plus: &DMatrix<f64>, a_minus: &DMatrix<f64>) -> Result<bool> {
    let sp = spectral_split(a_plus, DEFAULT_MARGIN_TOL)?;
    let sm = spectral_split(a_minus, DEFAULT_MARGIN_TOL)?;
    Ok(sp.stable_dim() == sm.stable_dim())
}

/// Coefficient access for asymptotics validation: a_n at a fixed parameter,
/// together with the declared limits.
pub trait CoefficientSequence {
    fn dim(&self) -> usize;
    fn coefficient(&self, n: i64) -> DMatrix<f64>;
    fn limit_plus(&self) -> DMatrix<f64>;
    fn limit_minus(&self) -> DMatrix<f64>;
}

/// Measures sup_{|n| >= m} ||a_n - a(sign(n) inf)|| for m <= n_max and checks
/// that both limits are hyperbolic and the tail at n_max is below `decay_tol`.
pub fn verify_asymptotics<S: CoefficientSequence>(
    seq: &S,
    n_max: usize,
    decay_tol: f64,
) -> Result<AsymptoticLimits> {
    let plus = spectral_split(&seq.limit_plus(), DEFAULT_MARGIN_TOL)?;
    let minus = spectral_split(&seq.limit_minus(), DEFAULT_MARGIN_TOL)?;
    let lim_p = seq.limit_plus();
    let lim_m = seq.limit_minus();
    let deviation = |n: i64| -> f64 {
        let limit = if n >= 0 { &lim_p } else { &lim_m };
        spectral_norm(&(seq.coefficient(n) - limit))
    };
    // Tail sups computed from the far end inward.
    let mut profile = vec![0.0f64; n_max + 1];
    let mut running = 0.0f64;
    for m in (1..=n_max as i64).rev() {
        running = running.max(deviation(m)).max(deviation(-m));
        profile[m as usize] = running;
    }
    profile[0] = running.max(deviation(0));
    let convergence_profile: Vec<(usize, f64)> =
        profile.iter().enumerate().map(|(m, d)| (m, *d)).collect();
    let tail = profile[n_max];
    if tail >= decay_tol {
        return Err(Error::SlowDecay {
            tail,
            n_max,
            tol: decay_tol,
        });
    }
    Ok(AsymptoticLimits {
        plus,
        minus,
        convergence_profile,
    })
}

/// Cap on the contraction-check iterate count.
fn contraction_iterations(margin: f64) -> usize {
    let m = (-30.0 / (1.0 - margin / 2.0).ln()).ceil();
    (m.max(1.0) as usize).min(500)
}

/// Dynamic characterization check: the restriction of a to E^s contracts
/// under iteration, and the restriction of a^{-1} to E^u likewise. The
/// powers are taken of the restricted operators, not of a itself: iterating
/// a^{-1} on an unstable vector in the ambient space amplifies roundoff
/// along E^s exponentially. Returns the worst observed restricted power
/// norm, after checking the frames are invariant.
pub fn contraction_check(split: &HyperbolicSplitting) -> Result<f64> {
    let m = contraction_iterations(split.margin);
    let a = &split.matrix;
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("matrix not invertible in contraction check".into()))?;
    let mut worst = 0.0f64;
    for (frame, op) in [(&split.stable_frame, a), (&split.unstable_frame, &a_inv)] {
        if frame.dim() == 0 {
            continue;
        }
        let f = frame.basis();
        let restricted = f.transpose() * op * f;
        let invariance = spectral_norm(&(op * f - f * &restricted)) / spectral_norm(op).max(1.0);
        if invariance > 1e-8 {
            return Err(Error::AssumptionFailed {
                name: "invariant subspace".into(),
                witness: format!("invariance residual {invariance:.3e}"),
            });
        }
        let mut power = restricted.clone();
        for _ in 1..m {
            power = &power * &restricted;
        }
        worst = worst.max(spectral_norm(&power));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    use crate::catalog::s7_matrix;

    fn diag(entries: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(entries))
    }

    #[test]
    fn diagonal_splitting() {
        let s = spectral_split(&diag(&[0.5, 2.0]), DEFAULT_MARGIN_TOL).unwrap();
        assert_eq!(s.stable_dim(), 1);
        assert_eq!(s.unstable_dim(), 1);
        assert_abs_diff_eq!(s.margin, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.stable_frame.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.unstable_frame.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn s7_matrix_splitting_matches_fiber_formula() {
        for k in 0..16 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / 16.0;
            let a = s7_matrix(theta);
            let s = spectral_split(&a, DEFAULT_MARGIN_TOL).unwrap();
            assert_eq!(s.stable_dim(), 1);
            // Eigenvalues are 1/2 and 2 for every theta.
            let mut mods: Vec<f64> = s
                .eigenvalues
                .iter()
                .map(|(re, im)| (re * re + im * im).sqrt())
                .collect();
            mods.sort_by(f64::total_cmp);
            assert_abs_diff_eq!(mods[0], 0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(mods[1], 2.0, epsilon = 1e-10);
            // Stable fiber is span{(cos theta/2, sin theta/2)}.
            let expected = DVector::from_row_slice(&[(theta / 2.0).cos(), (theta / 2.0).sin()]);
            let residual = s.stable_frame.projection_residual(&expected);
            assert!(residual < 1e-10, "residual {residual} at theta {theta}");
        }
    }

    #[test]
    fn rotation_is_rejected_as_non_hyperbolic() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        match spectral_split(&rot, DEFAULT_MARGIN_TOL) {
            Err(Error::NotHyperbolic { modulus, .. }) => {
                assert_abs_diff_eq!(modulus, 1.0, epsilon = 1e-12)
            }
            other => panic!("expected NotHyperbolic, got {other:?}"),
        }
    }

    #[test]
    fn projectors_are_idempotent_commuting_and_complementary() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 2.0, 0.3, 0.0, 0.0, 0.25]);
        let s = spectral_split(&a, DEFAULT_MARGIN_TOL).unwrap();
        let p = &s.stable_projector;
        assert!(spectral_norm(&(p * p - p)) < 1e-9);
        assert!(spectral_norm(&(p * &a - &a * p)) < 1e-9);
        let sum = p + s.unstable_projector();
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!(spectral_norm(&(sum - eye)) < 1e-12);
    }

    #[test]
    fn dynamic_characterization_holds() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.7, 0.0, 1.8]);
        let s = spectral_split(&a, DEFAULT_MARGIN_TOL).unwrap();
        assert!(contraction_check(&s).unwrap() < 1e-6);
    }

    #[test]
    fn transpose_has_equal_stable_dimension() {
        let a = DMatrix::from_row_slice(3, 3, &[0.4, 0.2, 0.0, -0.1, 1.5, 0.3, 0.0, 0.2, 3.0]);
        let s1 = spectral_split(&a, DEFAULT_MARGIN_TOL).unwrap();
        let s2 = spectral_split(&a.transpose(), DEFAULT_MARGIN_TOL).unwrap();
        assert_eq!(s1.stable_dim(), s2.stable_dim());
    }

    #[test]
    fn similarity_maps_stable_subspace() {
        let a = diag(&[0.5, 2.0, 0.3]);
        let s_mat = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.1, 1.0, 0.3, -0.2, 0.2, 1.0]);
        let conj = &s_mat * &a * s_mat.clone().try_inverse().unwrap();
        let split_a = spectral_split(&a, DEFAULT_MARGIN_TOL).unwrap();
        let split_c = spectral_split(&conj, DEFAULT_MARGIN_TOL).unwrap();
        assert_eq!(split_a.stable_dim(), split_c.stable_dim());
        // S maps E^s(a) into E^s(S a S^{-1}).
        for j in 0..split_a.stable_dim() {
            let mapped = &s_mat * split_a.stable_frame.column(j);
            let res = split_c.stable_frame.projection_residual(&mapped) / mapped.norm();
            assert!(res < 1e-9, "residual {res}");
        }
    }

    #[test]
    fn stable_dimensions_comparison() {
        assert!(stable_dimensions_equal(&diag(&[0.5, 2.0]), &diag(&[0.9, 1.5])).unwrap());
        assert!(!stable_dimensions_equal(&diag(&[0.5, 2.0]), &diag(&[0.5, 1.0 / 3.0])).unwrap());
        let a = diag(&[0.5, 2.0]);
        assert!(stable_dimensions_equal(&a, &a).unwrap());
    }

    struct GeomSeq {
        base: DMatrix<f64>,
        bump: DMatrix<f64>,
    }

    impl CoefficientSequence for GeomSeq {
        fn dim(&self) -> usize {
            self.base.nrows()
        }
        fn coefficient(&self, n: i64) -> DMatrix<f64> {
            &self.base + &self.bump * 0.5f64.powi(n.unsigned_abs() as i32)
        }
        fn limit_plus(&self) -> DMatrix<f64> {
            self.base.clone()
        }
        fn limit_minus(&self) -> DMatrix<f64> {
            self.base.clone()
        }
    }

    #[test]
    fn geometric_tail_profile() {
        let seq = GeomSeq {
            base: diag(&[0.5, 2.0]),
            bump: DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]),
        };
        let bump_norm = 0.1;
        let limits = verify_asymptotics(&seq, 40, 1e-9).unwrap();
        for &(m, d) in &limits.convergence_profile[1..=10] {
            let expected = bump_norm * 0.5f64.powi(m as i32);
            assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_family_has_zero_profile() {
        let seq = GeomSeq {
            base: diag(&[0.5, 2.0]),
            bump: DMatrix::zeros(2, 2),
        };
        let limits = verify_asymptotics(&seq, 10, 1e-12).unwrap();
        assert!(limits.convergence_profile.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn slow_decay_is_reported() {
        let seq = GeomSeq {
            base: diag(&[0.5, 2.0]),
            bump: DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]),
        };
        match verify_asymptotics(&seq, 5, 1e-9) {
            Err(Error::SlowDecay { tail, .. }) => assert!(tail > 0.0),
            other => panic!("expected SlowDecay, got {other:?}"),
        }
    }
}
