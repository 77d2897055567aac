//! Seeded generators for random hyperbolic matrices and loops with known
//! invariants: the matrices are built as W D W^{-1} with a prescribed
//! diagonal, so stable dimension, spectral margin and (for loops) the
//! orientation class of each bundle are known by construction.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::LoopSpec;
use crate::error::{Error, Result};

/// Guaranteed distance of every generated eigenvalue modulus from 1.
pub const RANDOM_MARGIN: f64 = 0.3;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_diagonal(rng: &mut ChaCha8Rng, dim: usize, stable_dim: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let v = if i < stable_dim {
            rng.gen_range(0.2..=0.7)
        } else {
            rng.gen_range(1.5..=3.0)
        };
        // Random signs keep the generator from being biased toward
        // positive spectra; moduli are what matters.
        d[(i, i)] = if rng.gen_bool(0.5) { v } else { -v };
    }
    d
}

fn random_gl(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..=1.0) * scale);
    g.exp()
}

/// A random hyperbolic matrix with exactly `stable_dim` eigenvalues inside
/// the unit disk and spectral margin at least [`RANDOM_MARGIN`].
pub fn random_hyperbolic_matrix(
    rng: &mut ChaCha8Rng,
    dim: usize,
    stable_dim: usize,
) -> Result<DMatrix<f64>> {
    if stable_dim > dim {
        return Err(Error::InvalidInput(format!(
            "stable_dim {stable_dim} exceeds dim {dim}"
        )));
    }
    let d = random_diagonal(rng, dim, stable_dim);
    let w = random_gl(rng, dim, 0.4);
    let w_inv = w
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular similarity".into()))?;
    Ok(&w * d * w_inv)
}

/// How the loop twists the eigenbasis over one revolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwistKind {
    /// No half-angle rotation: both bundles orientable.
    None,
    /// Half-angle rotation in a mixed (stable, unstable) plane: both the
    /// stable and the unstable bundle pick up w1 = -1.
    Mixed,
    /// Half-angle rotation inside the stable subspace (needs stable_dim
    /// >= 2): the two sign flips cancel, both bundles stay orientable.
    StablePair,
}

/// A generated loop together with its invariants known by construction.
#[derive(Debug, Clone)]
pub struct RandomLoop {
    pub spec: LoopSpec,
    pub dim: usize,
    pub stable_dim: usize,
    pub expected_w1_stable: i32,
    pub expected_w1_unstable: i32,
}

/// Rotation by `angle` in the coordinate plane (i, j).
fn plane_rotation(dim: usize, i: usize, j: usize, angle: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(dim, dim);
    r[(i, i)] = angle.cos();
    r[(j, j)] = angle.cos();
    r[(i, j)] = -angle.sin();
    r[(j, i)] = angle.sin();
    r
}

/// A random hyperbolic loop a(theta) = W(theta) D W(theta)^{-1} with
/// constant spectrum. W is the exponential of a closed trigonometric
/// polynomial, optionally composed with a half-angle rotation; the loop
/// closes because the half turn acts as -I on its plane, which commutes
/// with any diagonal.
pub fn random_hyperbolic_loop(
    rng: &mut ChaCha8Rng,
    dim: usize,
    stable_dim: usize,
    twist: TwistKind,
) -> Result<RandomLoop> {
    if stable_dim > dim {
        return Err(Error::InvalidInput(format!(
            "stable_dim {stable_dim} exceeds dim {dim}"
        )));
    }
    let plane = match twist {
        TwistKind::None => None,
        TwistKind::Mixed => {
            if stable_dim == 0 || stable_dim == dim {
                return Err(Error::InvalidInput(
                    "mixed twist needs both stable and unstable directions".into(),
                ));
            }
            Some((0usize, stable_dim))
        }
        TwistKind::StablePair => {
            if stable_dim < 2 {
                return Err(Error::InvalidInput(
                    "stable-pair twist needs stable_dim >= 2".into(),
                ));
            }
            Some((0usize, 1usize))
        }
    };
    let d = random_diagonal(rng, dim, stable_dim);
    let harmonics: Vec<(DMatrix<f64>, DMatrix<f64>)> = (1..=2)
        .map(|j| {
            let scale = 0.3 / j as f64;
            (
                DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..=1.0) * scale),
                DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..=1.0) * scale),
            )
        })
        .collect();
    let spec = LoopSpec::closed_form(move |theta| {
        let mut m = DMatrix::zeros(dim, dim);
        for (j, (a, b)) in harmonics.iter().enumerate() {
            let freq = (j + 1) as f64;
            m += a * (freq * theta).cos() + b * (freq * theta).sin();
        }
        let mut w = m.exp();
        if let Some((i, j)) = plane {
            w *= plane_rotation(dim, i, j, theta / 2.0);
        }
        let w_inv = w
            .clone()
            .try_inverse()
            .expect("exp * rotation is invertible");
        &w * &d * w_inv
    });
    let (ws, wu) = match twist {
        TwistKind::Mixed => (-1, -1),
        TwistKind::None | TwistKind::StablePair => (1, 1),
    };
    Ok(RandomLoop {
        spec,
        dim,
        stable_dim,
        expected_w1_stable: ws,
        expected_w1_unstable: wu,
    })
}
