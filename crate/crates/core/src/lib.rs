//! Signal recovery under single-index models using a diffusion model's
//! deterministic sampler `G` and its inversion `G†` as a learned prior.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod inversion;
pub mod measurements;
pub mod predictors;
pub mod recovery;
pub mod schedule;
pub mod solvers;
pub mod textio;
pub mod vecops;

pub use error::{Error, Result};
