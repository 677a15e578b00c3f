//! Fairness-accuracy trade-offs for pre- and post-processing channels over finite alphabets.

pub mod analysis;
pub mod cli;
pub mod curve;
pub mod error;
pub mod io;
pub mod lp;
pub mod post;
pub mod pre;
pub mod prob;
pub mod problem;

pub use error::{Error, Result};
pub use problem::{Criterion, DistortionMode};
