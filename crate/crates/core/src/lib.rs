//! Stability analysis of the asset-flow model of cryptocurrency prices.
//!
//! The model has three variants sharing one equilibrium `(1, 1, 1, 0, 0)`:
//! the price–liquidity pair, the price–liquidity–trend triple and the full
//! five-state system with an anchored price and a value sentiment. The crate
//! evaluates the nonlinear right-hand sides, linearizes at equilibrium,
//! computes spectra, checks closed-form criteria against them, integrates
//! trajectories and sweeps parameter planes.
//!
//! ```
//! use cryptoflow::{linear_verdict, ModelParams, ModelVariant, Verdict};
//!
//! let params = ModelParams { q: 2.0, q1: 1.0, tau0: 1.0, c: 1.0, c1: 1.0, ..Default::default() };
//! let v = linear_verdict(ModelVariant::sentiment(), &params, 1e-8).unwrap();
//! assert_eq!(v.tag, Verdict::Unstable);
//! ```

mod eigen;
pub mod criteria;
pub mod error;
pub mod gbm;
pub mod matrix;
pub mod model;
pub mod poly;
pub mod simulate;
pub mod stability;
pub mod sweep;

pub use num_complex::Complex64;
pub use criteria::{verify_consistency, Check, ConsistencyReport, CriterionResult};
pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use model::{equilibrium, rhs, validate_params, ModelParams, ModelVariant, StateVector, VariantKind};
pub use poly::Polynomial;
pub use simulate::{integrate, perturb_and_classify, SimConfig, Trajectory};
pub use stability::{classify, eigenvalues, jacobian_analytic, linear_verdict, Spectrum, StabilityVerdict, Verdict};
pub use sweep::{boundary_cells, run_sweep, StabilityMap, SweepSpec};

/// Crate version, embedded in every exported document.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
