//! Gaussian constitutive neural networks for soft-material biaxial testing.
//!
//! A fixed library of fourteen polyconvex orthotropic strain-energy terms is combined with
//! external weights that are jointly Gaussian. Stress means and variances follow in closed form,
//! so models are trained by maximum likelihood directly on the data distribution, with an `L0.5`
//! penalty on the mean weights to discover sparse models.
//!
//! Module map:
//!
//! - [`kinematics`]: invariants of incompressible biaxial extension and their stretch slopes.
//! - [`energy`]: the term library and per-term stress contributions.
//! - [`stress`]: Gaussian weight models and predicted stress distributions.
//! - [`objective`]: negative log likelihood, the extra-NLL diagnostic and the sparsity penalty.
//! - [`trainer`]: ADAM with projection, the two-phase regularization schedule, sweeps and model
//!   selection.
//! - [`data`]: CSV ingestion, the fixed train/dev split and synthetic data generation.
//! - [`document`] and [`cli`]: model files and the `gcann` command line.

pub mod cli;
pub mod data;
pub mod document;
pub mod energy;
pub mod error;
pub mod kinematics;
pub mod objective;
pub mod report;
pub mod stress;
pub mod trainer;

pub use error::{Error, Result};
