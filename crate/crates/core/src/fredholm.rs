//! Fredholm-theoretic invariants of the linearized jump family
//! L x = (x_{n+1} - a_n x_n): index, kernel, crossing determinant, parity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::catalog::SystemFamily;
use crate::error::{Error, Result};
use crate::hyperbolic::{spectral_split, HyperbolicSplitting, DEFAULT_MARGIN_TOL};
use crate::linalg::{
    self, orthonormalize_columns, subspace_intersection, SubspaceFrame, DEFAULT_TOL,
};
use crate::loopbundle::{
    transport_frames, w1_virtual, w1_with_refinement, BundleSide, MatrixLoop, MAX_LOOP_SAMPLES,
};

/// Tolerance below which |d| counts as a kernel crossing.
pub const CROSSING_TOL: f64 = 1e-8;

/// Coefficients a_n(lambda) = a(lambda, +inf) for n >= 0 and a(lambda, -inf)
/// for n < 0, with both asymptotic families sampled as loops.
#[derive(Debug, Clone)]
pub struct JumpSystem {
    pub plus: MatrixLoop,
    pub minus: MatrixLoop,
}

impl JumpSystem {
    pub fn new(plus: MatrixLoop, minus: MatrixLoop) -> Result<Self> {
        if plus.ambient_dim() != minus.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "loop ambient dims {} vs {}",
                plus.ambient_dim(),
                minus.ambient_dim()
            )));
        }
        Ok(JumpSystem { plus, minus })
    }

    /// Reduces a general asymptotically hyperbolic family to its jump form:
    /// the invariants only depend on the asymptotic loops.
    pub fn from_family(family: &SystemFamily, k: usize) -> Result<Self> {
        let plus = MatrixLoop::sample(&family.plus_loop, k)?;
        let minus = MatrixLoop::sample(&family.minus_loop, k)?;
        JumpSystem::new(plus, minus)
    }

    pub fn ambient_dim(&self) -> usize {
        self.plus.ambient_dim()
    }

    pub fn samples(&self) -> usize {
        self.plus.len()
    }

    pub fn resample(&self, k: usize) -> Result<Self> {
        JumpSystem::new(self.plus.resample(k)?, self.minus.resample(k)?)
    }

    /// Splittings of the asymptotic matrices at an arbitrary angle.
    pub fn split_at(&self, theta: f64) -> Result<(HyperbolicSplitting, HyperbolicSplitting)> {
        let sp = spectral_split(&self.plus.spec().at(theta), DEFAULT_MARGIN_TOL)?;
        let sm = spectral_split(&self.minus.spec().at(theta), DEFAULT_MARGIN_TOL)?;
        Ok((sp, sm))
    }
}

/// Fredholm index of the jump family: dim E^s(+inf) - dim E^s(-inf).
pub fn index_of_family(a_plus: &DMatrix<f64>, a_minus: &DMatrix<f64>) -> Result<i64> {
    let sp = spectral_split(a_plus, DEFAULT_MARGIN_TOL)?;
    let sm = spectral_split(a_minus, DEFAULT_MARGIN_TOL)?;
    Ok(sp.stable_dim() as i64 - sm.stable_dim() as i64)
}

/// w1 of the index bundle: product of the stable-bundle w1 values at the two
/// asymptotic ends. Requires index 0 at every sample.
pub fn index_bundle_w1(jump: &JumpSystem) -> Result<i32> {
    if jump.plus.stable_dim() != jump.minus.stable_dim() {
        return Err(Error::NonzeroIndex {
            plus: jump.plus.stable_dim(),
            minus: jump.minus.stable_dim(),
        });
    }
    let w_plus = w1_with_refinement(&jump.plus, BundleSide::Stable)?.w1;
    let w_minus = w1_with_refinement(&jump.minus, BundleSide::Stable)?.w1;
    w1_virtual(w_plus, w_minus)
}

/// Frame for Ker L at a point: E^s(lambda, +inf) intersected with
/// E^u(lambda, -inf), computed through principal angles.
pub fn kernel_jump(jump: &JumpSystem, theta: f64, tol: f64) -> Result<SubspaceFrame> {
    let (sp, sm) = jump.split_at(theta)?;
    subspace_intersection(&sp.stable_frame, &sm.unstable_frame, tol)
}

/// Reconstructs the bounded kernel sequence from its value at n = 0:
/// x_n = a(+inf)^n x_0 for n >= 0, x_n = a(-inf)^n x_0 for n <= 0.
///
/// The iteration runs in invariant-subspace coordinates: forward in
/// E^s(+inf), backward in E^u(-inf), each through the restricted k x k map
/// which is contracting in the direction traversed. Iterating the ambient
/// matrix instead would amplify any off-subspace component of x_0 (from a
/// slightly off-crossing theta, or plain roundoff) by the expansion rate to
/// the power of the truncation length.
pub fn kernel_orbit(
    jump: &JumpSystem,
    theta: f64,
    x0: &DVector<f64>,
    n_minus: usize,
    n_plus: usize,
) -> Result<Vec<DVector<f64>>> {
    let (sp, sm) = jump.split_at(theta)?;
    let fs = sp.stable_frame.basis();
    let fu = sm.unstable_frame.basis();
    let a_plus = jump.plus.spec().at(theta);
    let a_minus = jump.minus.spec().at(theta);
    // Restrictions in the orthonormal frames; b_minus has spectrum outside
    // the unit disk, so its inverse contracts.
    let b_plus = fs.transpose() * &a_plus * fs;
    let b_minus = fu.transpose() * &a_minus * fu;
    let b_minus_inv = b_minus.try_inverse().ok_or_else(|| {
        Error::InvalidInput("restricted a(-inf) not invertible in kernel reconstruction".into())
    })?;
    let mut forward = Vec::with_capacity(n_plus + 1);
    forward.push(x0.clone());
    let mut c = fs.transpose() * x0;
    for _ in 0..n_plus {
        c = &b_plus * c;
        forward.push(fs * &c);
    }
    let mut backward = Vec::with_capacity(n_minus);
    let mut c = fu.transpose() * x0;
    for _ in 0..n_minus {
        c = &b_minus_inv * c;
        backward.push(fu * &c);
    }
    backward.reverse();
    backward.extend(forward);
    Ok(backward)
}

/// Crossing determinant samples along the loop, with aligned frames so the
/// value is continuous in the angle. d vanishes exactly on the kernel locus.
#[derive(Debug, Clone)]
pub struct CrossingScan {
    pub start: f64,
    /// K + 1 angles; the last is start + 2*pi (closure).
    pub thetas: Vec<f64>,
    /// d at each angle; the closure value differs from d(start) by the
    /// holonomy sign product.
    pub d: Vec<f64>,
    pub frames_stable_plus: Vec<SubspaceFrame>,
    pub frames_unstable_minus: Vec<SubspaceFrame>,
}

/// Determinant of [F^s_+ | F^u_-] for a pair of aligned frames.
pub fn crossing_determinant(
    frame_stable_plus: &SubspaceFrame,
    frame_unstable_minus: &SubspaceFrame,
) -> Result<f64> {
    let n = frame_stable_plus.ambient_dim();
    let ks = frame_stable_plus.dim();
    let ku = frame_unstable_minus.dim();
    if ks + ku != n {
        return Err(Error::DimensionMismatch(format!(
            "stable(+) dim {ks} + unstable(-) dim {ku} != ambient {n}"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (n, ks))
        .copy_from(frame_stable_plus.basis());
    m.view_mut((0, ks), (n, ku))
        .copy_from(frame_unstable_minus.basis());
    linalg::det(&m)
}

/// Transports the relevant frames around the loop starting at `start` and
/// evaluates d at every sample plus the closure.
pub fn crossing_scan(jump: &JumpSystem, start: f64, k: usize) -> Result<CrossingScan> {
    let plus = MatrixLoop::sample(&jump.plus.spec().shifted(start), k)?;
    let minus = MatrixLoop::sample(&jump.minus.spec().shifted(start), k)?;
    let ts = transport_frames(&plus, BundleSide::Stable)?;
    let tu = transport_frames(&minus, BundleSide::Unstable)?;
    let mut thetas = Vec::with_capacity(k + 1);
    let mut d = Vec::with_capacity(k + 1);
    for i in 0..=k {
        thetas.push(start + 2.0 * PI * i as f64 / k as f64);
        d.push(crossing_determinant(&ts.frames[i], &tu.frames[i])?);
    }
    Ok(CrossingScan {
        start,
        thetas,
        d,
        frames_stable_plus: ts.frames,
        frames_unstable_minus: tu.frames,
    })
}

/// Projects anchored frames to the subspaces at a nearby angle and evaluates
/// d there; used by the bisection refinement.
fn d_from_anchor(
    jump: &JumpSystem,
    theta: f64,
    anchor_s: &SubspaceFrame,
    anchor_u: &SubspaceFrame,
) -> Result<(f64, SubspaceFrame, SubspaceFrame)> {
    let (sp, sm) = jump.split_at(theta)?;
    let proj_s = sp.stable_frame.projector() * anchor_s.basis();
    let proj_u = sm.unstable_frame.projector() * anchor_u.basis();
    let fs = orthonormalize_columns(&proj_s, DEFAULT_TOL)?;
    let fu = orthonormalize_columns(&proj_u, DEFAULT_TOL)?;
    if fs.dim() != anchor_s.dim() || fu.dim() != anchor_u.dim() {
        return Err(Error::SamplingInadequate {
            gap: 1.0,
            limit: 1.0,
        });
    }
    let d = crossing_determinant(&fs, &fu)?;
    Ok((d, fs, fu))
}

/// An isolated sign change of the crossing determinant.
#[derive(Debug, Clone)]
pub struct CrossingInterval {
    pub lo: f64,
    pub hi: f64,
}

impl CrossingInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Target width of bisected crossing intervals: 2*pi / 2^20.
pub const CROSSING_INTERVAL_WIDTH: f64 = 2.0 * PI / (1u64 << 20) as f64;

/// Bisects every sign change of a scan down to [`CROSSING_INTERVAL_WIDTH`].
/// Sign changes are located between consecutive samples with |d| above the
/// crossing tolerance, so a grid point sitting exactly on a zero is absorbed
/// into the surrounding interval.
pub fn isolate_crossings(jump: &JumpSystem, scan: &CrossingScan) -> Result<Vec<CrossingInterval>> {
    let retained: Vec<usize> = (0..scan.d.len())
        .filter(|&i| scan.d[i].abs() > CROSSING_TOL)
        .collect();
    // Two or more consecutive below-tolerance samples mean d is flat near
    // zero there, which route A cannot resolve.
    for w in retained.windows(2) {
        if w[1] - w[0] > 2 {
            return Err(Error::Degenerate {
                value: scan.d[w[0] + 1],
                context: format!(
                    "crossing determinant flat near theta = {}",
                    scan.thetas[w[0] + 1]
                ),
            });
        }
    }
    let mut intervals = Vec::new();
    for w in retained.windows(2) {
        let (i, j) = (w[0], w[1]);
        if scan.d[i].signum() == scan.d[j].signum() {
            continue;
        }
        let mut lo = scan.thetas[i];
        let mut hi = scan.thetas[j];
        let mut d_lo = scan.d[i];
        let mut frame_s = scan.frames_stable_plus[i].clone();
        let mut frame_u = scan.frames_unstable_minus[i].clone();
        while hi - lo > CROSSING_INTERVAL_WIDTH {
            let mid = 0.5 * (lo + hi);
            let (d_mid, fs, fu) = d_from_anchor(jump, mid, &frame_s, &frame_u)?;
            if d_lo.signum() * d_mid.signum() <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                d_lo = d_mid;
                frame_s = fs;
                frame_u = fu;
            }
        }
        intervals.push(CrossingInterval { lo, hi });
    }
    Ok(intervals)
}

/// Parity of the loop of operators based at `lambda0`, computed two ways and
/// cross-checked: accumulated sign changes of d (route A) against the
/// index-bundle w1 (route B).
pub fn parity_of_loop(jump: &JumpSystem, lambda0: f64) -> Result<i32> {
    let mut k = jump.samples();
    loop {
        match parity_attempt(jump, lambda0, k) {
            Ok(p) => return Ok(p),
            Err(Error::InconsistentParity { route_a, route_b }) => {
                k *= 2;
                if k > MAX_LOOP_SAMPLES {
                    return Err(Error::InconsistentParity { route_a, route_b });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn parity_attempt(jump: &JumpSystem, lambda0: f64, k: usize) -> Result<i32> {
    let scan = crossing_scan(jump, lambda0, k)?;
    if scan.d[0].abs() <= CROSSING_TOL {
        return Err(Error::Degenerate {
            value: scan.d[0],
            context: format!("d(lambda0) at lambda0 = {lambda0}; pick a different base point"),
        });
    }
    // Route A: product of sign changes between consecutive samples with both
    // endpoints above the crossing tolerance.
    let retained: Vec<f64> = scan
        .d
        .iter()
        .cloned()
        .filter(|v| v.abs() > CROSSING_TOL)
        .collect();
    let mut route_a = 1i32;
    for w in retained.windows(2) {
        if w[0].signum() != w[1].signum() {
            route_a = -route_a;
        }
    }
    // Route B: w1 of the index bundle.
    let route_b = index_bundle_w1(jump)?;
    if route_a != route_b {
        return Err(Error::InconsistentParity { route_a, route_b });
    }
    Ok(route_a)
}

/// Square finite section of the linearized operator at a fixed angle:
/// interior rows x_{n+1} - a_n x_n for -n_minus <= n < n_plus, plus N
/// projection boundary rows compressing P^s(-inf) x_{-n_minus} = 0 and
/// P^u(+inf) x_{n_plus} = 0 into orthonormal frames.
pub fn finite_section(
    family: &SystemFamily,
    theta: f64,
    n_minus: usize,
    n_plus: usize,
) -> Result<DMatrix<f64>> {
    if n_minus < 1 || n_plus < 1 {
        return Err(Error::InvalidInput(
            "finite section needs n_minus >= 1 and n_plus >= 1".into(),
        ));
    }
    let n = family.dim;
    let steps = n_minus + n_plus;
    let unknowns = (steps + 1) * n;
    let split_minus = spectral_split(&family.minus_loop.at(theta), DEFAULT_MARGIN_TOL)?;
    let split_plus = spectral_split(&family.plus_loop.at(theta), DEFAULT_MARGIN_TOL)?;
    let ks = split_minus.stable_dim();
    let ku = split_plus.unstable_dim();
    if ks + ku != n {
        return Err(Error::NonzeroIndex {
            plus: split_plus.stable_dim(),
            minus: split_minus.stable_dim(),
        });
    }
    let mut m = DMatrix::zeros(unknowns, unknowns);
    for i in 0..steps {
        let step_n = i as i64 - n_minus as i64;
        let a = family.coefficient(theta, step_n);
        let row0 = i * n;
        m.view_mut((row0, i * n), (n, n)).copy_from(&(-a));
        m.view_mut((row0, (i + 1) * n), (n, n))
            .copy_from(&DMatrix::identity(n, n));
    }
    // Boundary blocks: F^T P keeps the rows well-conditioned while encoding
    // the full projector condition.
    let rows_left = split_minus.stable_frame.basis().transpose() * &split_minus.stable_projector;
    let rows_right =
        split_plus.unstable_frame.basis().transpose() * split_plus.unstable_projector();
    let boundary0 = steps * n;
    m.view_mut((boundary0, 0), (ks, n)).copy_from(&rows_left);
    m.view_mut((boundary0 + ks, steps * n), (ku, n))
        .copy_from(&rows_right);
    Ok(m)
}

/// One-sided truncated operator of the half-line system x_{n+1} = a x_n with
/// only the decay condition at the far end: interior rows for 0 <= n < m plus
/// the P^u boundary rows at x_m. Its numerical null space has dim E^s(a).
pub fn one_sided_section(a: &DMatrix<f64>, m_len: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let split = spectral_split(a, DEFAULT_MARGIN_TOL)?;
    let ku = split.unstable_dim();
    let rows = m_len * n + ku;
    let cols = (m_len + 1) * n;
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..m_len {
        m.view_mut((i * n, i * n), (n, n)).copy_from(&(-a));
        m.view_mut((i * n, (i + 1) * n), (n, n))
            .copy_from(&DMatrix::identity(n, n));
    }
    let boundary = split.unstable_frame.basis().transpose() * split.unstable_projector();
    m.view_mut((m_len * n, m_len * n), (ku, n))
        .copy_from(&boundary);
    Ok(m)
}
