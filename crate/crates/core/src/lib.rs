//! Region-of-attraction certificates built from Koopman eigenfunction candidates.

pub mod cli;
pub mod config;
pub mod contour;
pub mod dynamics;
pub mod empirical;
pub mod error;
pub mod gridval;
pub mod koopman;
pub mod levels;
pub mod lp;
pub mod poly;
pub mod polyapprox;
pub mod roa;
pub mod sdp;
pub mod sosval;
pub mod validity;

pub use error::{Error, Result};
