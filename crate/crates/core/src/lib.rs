//! Privacy-leakage and utility measures on finite alphabets, finite-sample
//! robustness certificates for plug-in estimates, and privacy mechanism
//! design.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod leakage;
pub mod mechanisms;
pub mod preprocess;
pub mod prob;
mod real_or_inf;

pub use error::{Error, Result};

/// Library version, echoed in result sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
