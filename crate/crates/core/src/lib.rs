//! Few-shot domain-adaptive text classification built on similarity-weighted
//! second-order meta-learning, with baselines, ablations, a synthetic
//! domain-shift benchmark and a reproducible experiment CLI.

pub mod adapt;
pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod params;

pub use error::{Error, Result};
