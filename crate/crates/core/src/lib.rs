//! Out-of-distribution sample generation from an in-distribution point set.
//!
//! Three generators are provided: Gaussian hyperspheric offset
//! ([`sampling::gho_generate`]), soft Brownian offset
//! ([`sampling::sbo_generate`]) and hard Brownian offset
//! ([`sampling::hbo_generate`]). Around them sit the pieces needed to run a
//! complete evaluation: synthetic datasets, a PCA representation stage, DTW
//! Wasserstein distances between datasets, and a small detector whose F1 and
//! AUROC measure how useful a generated OOD set is for training.

pub mod cli;
pub mod detector;
pub mod error;
pub mod features;
pub mod geometry;
pub mod index;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod points;
pub mod rng;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
pub use points::PointSet;
pub use rng::RandomStream;
