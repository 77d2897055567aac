//! Certification and localization of homoclinic bifurcations for
//! discrete-time nonautonomous systems x_{n+1} = f_n(lambda, x_n)
//! parametrized by the circle.
//!
//! The pipeline has two halves:
//!
//! * **Topological detection** — hyperbolic splittings of the asymptotic
//!   coefficient loops, orientation classes (w1) of the stable/unstable
//!   bundles by frame transport, Fredholm index, and the parity of the
//!   linearized family, cross-checked along two independent routes.
//!   A bifurcation is certified when the two asymptotic stable bundles
//!   have different w1.
//! * **Localization** — scanning the crossing determinant over the circle,
//!   bisecting its sign changes, and exhibiting the bifurcating branch by
//!   Newton solves on truncated boundary-value problems with projection
//!   boundary conditions.

pub mod catalog;
pub mod error;
pub mod fredholm;
pub mod homoclinic;
pub mod hyperbolic;
pub mod linalg;
pub mod loopbundle;
pub mod randomgen;
pub mod schur;

pub use catalog::{catalog, LoopSpec, Nonlinearity, SystemFamily, CATALOG_NAMES};
pub use error::{Error, Result};
pub use fredholm::{
    crossing_determinant, crossing_scan, finite_section, index_bundle_w1, index_of_family,
    isolate_crossings, kernel_jump, kernel_orbit, one_sided_section, parity_of_loop,
    CrossingInterval, CrossingScan, JumpSystem, CROSSING_INTERVAL_WIDTH, CROSSING_TOL,
};
pub use homoclinic::{
    branch_solve, detect, scan, truncation_lengths, validate_assumptions, AssumptionCheck,
    BifurcationReport, BranchPoint, OrbitSegment, ScanRow, TruncatedBvp, AMPLITUDE_CAP,
};
pub use hyperbolic::{spectral_split, verify_asymptotics, HyperbolicSplitting};
pub use linalg::SubspaceFrame;
pub use loopbundle::{w1_with_refinement, BundleSide, MatrixLoop, TransportResult};
pub use randomgen::{random_hyperbolic_loop, random_hyperbolic_matrix, seeded_rng, TwistKind};
