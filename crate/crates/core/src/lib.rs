//! Annealed and multi-resolution Langevin sampling on distributions supported
//! on embedded manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: chart-parametrised manifolds, quadrature meshes with graph
//!   geodesics, curvature quantities (Ricci lower bound, Kato constant,
//!   diameter, Bishop–Gromov volume comparison).
//! * [`target`]: target distributions on those manifolds and exact oracles for
//!   the Gaussian-smoothed density, its score and its Hessian.
//! * [`dsm`]: denoising score matching losses and a closed-form ridge score
//!   model, plus controlled score perturbations.
//! * [`sampler`]: the Langevin update, annealed Langevin and the
//!   multi-resolution ladder.
//! * [`metrics`]: exact and sliced Wasserstein-2, decay fits, mixing time and
//!   divergence detection.
//! * [`bounds`]: log-space evaluators for the log-Sobolev, diameter and
//!   spectral-gap bounds.

pub mod bounds;
pub mod dsm;
mod error;
pub mod geometry;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod target;

pub use error::{Error, Result};
pub use metrics::PointCloud;
pub use target::{ScoreField, SmoothedOracle};

