//! System catalog: closed-form families used by the CLI and the test suite,
//! plus the generic loop/family types they plug into.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A continuous closed family theta -> a(theta) on [0, 2*pi], sampled on
/// demand at any resolution.
#[derive(Clone)]
pub enum LoopSpec {
    /// Closed-form generator; must satisfy f(0) = f(2*pi).
    ClosedForm(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
    /// Tabulated samples at theta_k = 2*pi*k/K; intermediate angles are
    /// filled by linear interpolation between neighbouring samples.
    Tabulated(Arc<Vec<DMatrix<f64>>>),
}

impl LoopSpec {
    pub fn closed_form<F>(f: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        LoopSpec::ClosedForm(Arc::new(f))
    }

    pub fn constant(a: DMatrix<f64>) -> Self {
        LoopSpec::closed_form(move |_| a.clone())
    }

    pub fn tabulated(samples: Vec<DMatrix<f64>>) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "tabulated loop needs at least 4 samples, got {}",
                samples.len()
            )));
        }
        Ok(LoopSpec::Tabulated(Arc::new(samples)))
    }

    pub fn dim(&self) -> usize {
        match self {
            LoopSpec::ClosedForm(f) => f(0.0).nrows(),
            LoopSpec::Tabulated(samples) => samples[0].nrows(),
        }
    }

    /// Evaluates the family at an angle (wrapped into [0, 2*pi)).
    pub fn at(&self, theta: f64) -> DMatrix<f64> {
        let two_pi = 2.0 * PI;
        let wrapped = theta.rem_euclid(two_pi);
        match self {
            LoopSpec::ClosedForm(f) => f(wrapped),
            LoopSpec::Tabulated(samples) => {
                let k = samples.len();
                let pos = wrapped / two_pi * k as f64;
                let i = (pos.floor() as usize) % k;
                let frac = pos - pos.floor();
                let next = (i + 1) % k;
                &samples[i] * (1.0 - frac) + &samples[next] * frac
            }
        }
    }

    /// The same loop traversed from a different base point.
    pub fn shifted(&self, offset: f64) -> LoopSpec {
        let inner = self.clone();
        LoopSpec::closed_form(move |theta| inner.at(theta + offset))
    }

    /// Uniform samples at theta_k = 2*pi*k/K, k = 0..K-1.
    pub fn sample(&self, k: usize) -> Vec<DMatrix<f64>> {
        (0..k)
            .map(|i| self.at(2.0 * PI * i as f64 / k as f64))
            .collect()
    }
}

impl std::fmt::Debug for LoopSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoopSpec::ClosedForm(_) => write!(f, "LoopSpec::ClosedForm"),
            LoopSpec::Tabulated(s) => write!(f, "LoopSpec::Tabulated({} samples)", s.len()),
        }
    }
}

/// Nonlinear perturbation h_n(lambda, x) added on top of the linear part.
#[derive(Debug, Clone)]
pub enum Nonlinearity {
    None,
    /// h_n(lambda, x) = c * rho^|n| * (x_1 + ... + x_N)^3 * (1, ..., 1).
    /// The coupling matters: a componentwise cubic would leave coordinate
    /// axes invariant, and a kernel orbit lying on an axis would then spawn
    /// an exact nonlinear branch at constant lambda.
    CubicDecay {
        c: f64,
        rho: f64,
    },
}

impl Nonlinearity {
    pub fn eval(&self, n: i64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonlinearity::None => DVector::zeros(x.len()),
            Nonlinearity::CubicDecay { c, rho } => {
                let w = c * rho.powi(n.unsigned_abs().min(i32::MAX as u64) as i32);
                let s = x.sum();
                DVector::from_element(x.len(), w * s * s * s)
            }
        }
    }

    /// Analytic Jacobian dh/dx at (n, x).
    pub fn jacobian(&self, n: i64, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Nonlinearity::None => DMatrix::zeros(x.len(), x.len()),
            Nonlinearity::CubicDecay { c, rho } => {
                let w = c * rho.powi(n.unsigned_abs().min(i32::MAX as u64) as i32);
                let s = x.sum();
                DMatrix::from_element(x.len(), x.len(), 3.0 * w * s * s)
            }
        }
    }
}

/// Optional middle-section deviation from the jump form:
/// a_n(lambda) = jump value + rho^|n| * B.
#[derive(Debug, Clone)]
pub struct MiddlePerturbation {
    pub matrix: DMatrix<f64>,
    pub rho: f64,
}

/// Full nonlinear family f_n(lambda, x) = a_n(lambda) x + h_n(lambda, x).
#[derive(Debug, Clone)]
pub struct SystemFamily {
    pub name: String,
    pub dim: usize,
    /// Asymptotic coefficient family at +infinity (n >= 0 in jump form).
    pub plus_loop: LoopSpec,
    /// Asymptotic coefficient family at -infinity (n < 0 in jump form).
    pub minus_loop: LoopSpec,
    pub middle: Option<MiddlePerturbation>,
    pub nonlinearity: Nonlinearity,
    /// Declared decay rate of coefficient tails, in (0, 1).
    pub decay_rate: f64,
    /// Declared sup bound for ||df_n/dx|| over the unit-ball probe set.
    pub derivative_bound: f64,
}

impl SystemFamily {
    /// Linear coefficient a_n(lambda) at step n and angle theta.
    pub fn coefficient(&self, theta: f64, n: i64) -> DMatrix<f64> {
        let jump = if n >= 0 {
            self.plus_loop.at(theta)
        } else {
            self.minus_loop.at(theta)
        };
        match &self.middle {
            None => jump,
            Some(p) => jump + &p.matrix * p.rho.powi(n.unsigned_abs().min(i32::MAX as u64) as i32),
        }
    }

    /// Full map f_n(lambda, x).
    pub fn eval(&self, theta: f64, n: i64, x: &DVector<f64>) -> DVector<f64> {
        self.coefficient(theta, n) * x + self.nonlinearity.eval(n, x)
    }

    /// Analytic state Jacobian df_n/dx(lambda, x).
    pub fn state_jacobian(&self, theta: f64, n: i64, x: &DVector<f64>) -> DMatrix<f64> {
        self.coefficient(theta, n) + self.nonlinearity.jacobian(n, x)
    }

    pub fn is_jump(&self) -> bool {
        self.middle.is_none()
    }
}

/// The worked-example matrix: eigenvalues 1/2 and 2 for every theta, stable
/// fiber span{(cos theta/2, sin theta/2)}.
pub fn s7_matrix(theta: f64) -> DMatrix<f64> {
    let h = theta / 2.0;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            0.5 + 1.5 * h.sin() * h.sin(),
            -0.75 * theta.sin(),
            -0.75 * theta.sin(),
            0.5 + 1.5 * h.cos() * h.cos(),
        ],
    )
}

/// Names of the built-in systems, in catalog order.
pub const CATALOG_NAMES: &[&str] = &[
    "paper_example_s7",
    "paper_example_s7_cubic",
    "paper_example_s7_doubled",
    "constant_hyperbolic",
];

/// Looks up a built-in system family by name.
pub fn catalog(name: &str) -> Result<SystemFamily> {
    match name {
        // Moebius stable bundle at +inf, trivial at -inf; kernel crossing at
        // theta = pi only.
        "paper_example_s7" => Ok(SystemFamily {
            name: name.into(),
            dim: 2,
            plus_loop: LoopSpec::closed_form(s7_matrix),
            minus_loop: LoopSpec::constant(s7_matrix(0.0)),
            middle: None,
            nonlinearity: Nonlinearity::None,
            decay_rate: 0.5,
            derivative_bound: 2.5,
        }),
        // Same linear part with the cubic decaying perturbation, which keeps
        // the stationary branch and the linearization at 0 untouched.
        "paper_example_s7_cubic" => Ok(SystemFamily {
            name: name.into(),
            dim: 2,
            plus_loop: LoopSpec::closed_form(s7_matrix),
            minus_loop: LoopSpec::constant(s7_matrix(0.0)),
            middle: None,
            nonlinearity: Nonlinearity::CubicDecay { c: 1.0, rho: 0.5 },
            decay_rate: 0.5,
            // Linear part plus 3 (sum x_i)^2 over the unit-box probe set.
            derivative_bound: 16.0,
        }),
        // Generator traversed twice: two kernel crossings per loop.
        "paper_example_s7_doubled" => Ok(SystemFamily {
            name: name.into(),
            dim: 2,
            plus_loop: LoopSpec::closed_form(|theta| s7_matrix(2.0 * theta)),
            minus_loop: LoopSpec::constant(s7_matrix(0.0)),
            middle: None,
            nonlinearity: Nonlinearity::None,
            decay_rate: 0.5,
            derivative_bound: 2.5,
        }),
        // Both asymptotic loops constant: trivial bundles, no bifurcation.
        "constant_hyperbolic" => Ok(SystemFamily {
            name: name.into(),
            dim: 2,
            plus_loop: LoopSpec::constant(s7_matrix(0.0)),
            minus_loop: LoopSpec::constant(s7_matrix(0.0)),
            middle: None,
            nonlinearity: Nonlinearity::None,
            decay_rate: 0.5,
            derivative_bound: 2.5,
        }),
        _ => Err(Error::InvalidInput(format!(
            "unknown catalog system '{name}' (known: {})",
            CATALOG_NAMES.join(", ")
        ))),
    }
}
