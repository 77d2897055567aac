//! Run configuration: JSON schema, defaults, validation, and conversion of
//! inline tabulated systems into core families.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use hombif_core::catalog::{LoopSpec, Nonlinearity};
use hombif_core::{catalog, SystemFamily, AMPLITUDE_CAP};

/// Tolerance within which the closure sample of an inline tabulated loop
/// must match its first sample.
pub const INLINE_CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
}

fn default_k() -> usize {
    64
}

fn default_eps() -> Vec<f64> {
    vec![1e-3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Catalog(String),
    Inline(InlineSystem),
}

/// Inline jump system tabulated on the grid theta_k = 2*pi*k/K: each loop
/// is given as K+1 row-major matrices, the last being the closure sample at
/// 2*pi which must match the first within [`INLINE_CLOSURE_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub name: String,
    pub dim: usize,
    pub plus: Vec<Vec<Vec<f64>>>,
    pub minus: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truncation {
    Tol { tol: f64 },
    Explicit { n_minus: usize, n_plus: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Tol { tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_crossing")]
    pub crossing: f64,
    #[serde(default = "default_newton")]
    pub newton: f64,
}

fn default_margin() -> f64 {
    1e-6
}

fn default_crossing() -> f64 {
    1e-8
}

fn default_newton() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            margin: default_margin(),
            crossing: default_crossing(),
            newton: default_newton(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Default configuration for a named catalog system.
    pub fn for_system(name: &str) -> Self {
        RunConfig {
            system: SystemSpec::Catalog(name.to_string()),
            k: default_k(),
            truncation: Truncation::default(),
            lambda0: 0.0,
            eps: default_eps(),
            tolerances: Tolerances::default(),
            output: Output::default(),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.k < 4 {
            bail!("K must be at least 4, got {} (field K)", self.k);
        }
        if self.eps.is_empty() {
            bail!("eps list must not be empty (field eps)");
        }
        for &e in &self.eps {
            if !(e > 0.0 && e <= AMPLITUDE_CAP) {
                bail!("eps values must lie in (0, {AMPLITUDE_CAP}], got {e} (field eps)");
            }
        }
        match self.truncation {
            Truncation::Tol { tol } => {
                if !(tol > 0.0 && tol < 1.0) {
                    bail!("truncation tol must lie in (0, 1), got {tol} (field truncation.tol)");
                }
            }
            Truncation::Explicit { n_minus, n_plus } => {
                if n_minus < 1 || n_plus < 1 {
                    bail!(
                        "explicit truncation lengths must be >= 1, got {n_minus}/{n_plus} \
                         (field truncation)"
                    );
                }
            }
        }
        for (name, v) in [
            ("tolerances.margin", self.tolerances.margin),
            ("tolerances.crossing", self.tolerances.crossing),
            ("tolerances.newton", self.tolerances.newton),
        ] {
            if v <= 0.0 || v.is_nan() {
                bail!("{name} must be positive, got {v}");
            }
        }
        if !self.lambda0.is_finite() {
            bail!("lambda0 must be finite (field lambda0)");
        }
        if let SystemSpec::Inline(inline) = &self.system {
            inline.validate()?;
        }
        Ok(())
    }

    /// Builds the core family this configuration refers to.
    pub fn family(&self) -> anyhow::Result<SystemFamily> {
        match &self.system {
            SystemSpec::Catalog(name) => Ok(catalog(name)?),
            SystemSpec::Inline(inline) => inline.to_family(),
        }
    }

    /// Resolves the truncation lengths against the family's decay rates.
    pub fn truncation_lengths(&self, family: &SystemFamily) -> anyhow::Result<(usize, usize)> {
        match self.truncation {
            Truncation::Explicit { n_minus, n_plus } => Ok((n_minus, n_plus)),
            Truncation::Tol { tol } => Ok(hombif_core::truncation_lengths(family, tol)?),
        }
    }
}

impl InlineSystem {
    fn validate(&self) -> anyhow::Result<()> {
        if self.dim == 0 {
            bail!("inline system dim must be positive (field system.dim)");
        }
        for (side, rows) in [("plus", &self.plus), ("minus", &self.minus)] {
            if rows.len() < 5 {
                bail!(
                    "inline loop '{side}' needs at least 4 samples plus the closure row, got {} \
                     (field system.{side})",
                    rows.len()
                );
            }
            for (i, m) in rows.iter().enumerate() {
                if m.len() != self.dim || m.iter().any(|r| r.len() != self.dim) {
                    bail!(
                        "inline loop '{side}' sample {i} is not a {0}x{0} matrix \
                         (field system.{side})",
                        self.dim
                    );
                }
            }
            let first = &rows[0];
            let last = rows.last().unwrap();
            let gap = first
                .iter()
                .flatten()
                .zip(last.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if gap > INLINE_CLOSURE_TOL {
                bail!(
                    "inline loop '{side}' does not close: |last - first| = {gap:.3e} exceeds \
                     {INLINE_CLOSURE_TOL:.0e} (field system.{side})"
                );
            }
        }
        Ok(())
    }

    fn to_family(&self) -> anyhow::Result<SystemFamily> {
        self.validate()?;
        let to_spec = |rows: &[Vec<Vec<f64>>]| -> anyhow::Result<LoopSpec> {
            // Closure row dropped: LoopSpec samples live at theta_k, k < K.
            let samples: Vec<DMatrix<f64>> = rows[..rows.len() - 1]
                .iter()
                .map(|m| {
                    DMatrix::from_row_slice(
                        self.dim,
                        self.dim,
                        &m.iter().flatten().cloned().collect::<Vec<f64>>(),
                    )
                })
                .collect();
            Ok(LoopSpec::tabulated(samples)?)
        };
        let bound = self
            .plus
            .iter()
            .chain(&self.minus)
            .flatten()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            * 1.01;
        Ok(SystemFamily {
            name: self.name.clone(),
            dim: self.dim,
            plus_loop: to_spec(&self.plus)?,
            minus_loop: to_spec(&self.minus)?,
            middle: None,
            nonlinearity: Nonlinearity::None,
            decay_rate: 0.5,
            derivative_bound: bound,
        })
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    config.validate()?;
    Ok(config)
}
