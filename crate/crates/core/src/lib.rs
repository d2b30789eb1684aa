//! Infrared target tracking with proximal robust principal component analysis.
//!
//! A candidate patch and a small dictionary of target templates are stacked
//! into an observation matrix, which [`rpca::decompose`] splits into a
//! low-rank target part and a sparse occlusion part. A particle filter
//! ([`particle`]) scores candidates by how well the target part explains
//! them, [`template`] keeps the dictionary current, and [`eval`] measures
//! center error and overlap against ground truth.

pub mod appearance;
pub mod cli;
pub mod error;
pub mod eval;
pub mod frame;
pub mod io;
pub mod particle;
pub mod proximal;
pub mod rpca;
pub mod synthetic;
pub mod template;
pub mod tracker;

pub use error::{Error, Result};
