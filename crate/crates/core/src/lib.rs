//! Continuous-state branching processes with competition in Lévy random
//! environments: integral classification tests, scale-function and
//! Riccati-based analytics for hitting times, invariant laws, and a
//! jump-diffusion Monte Carlo engine used to cross-check every formula.

pub mod cli;
pub mod diffusion_scale;
pub mod error;
pub mod logistic_analytics;
pub mod mechanisms;
pub mod quadrature;
pub mod riccati;
pub mod simulate;

pub use error::{CbreError, Result};
