//! Likelihood-ratio trend tests for dose-response data with nonlinear
//! candidate models.
//!
//! A response vector is centered and normalized onto a sphere; each candidate
//! model traces a curve of standardized predictions on the same sphere. The
//! test statistic is the largest correlation between the two, and its null
//! distribution is the volume of a tube around the union of curves, estimated
//! by Monte Carlo in [`tube`].

pub mod bench;
pub mod contrast;
pub mod error;
pub mod io;
pub mod lr;
pub mod rng;
pub mod shapes;
pub mod special;
pub mod sphere;
pub mod tube;

pub use error::{Error, Result};
