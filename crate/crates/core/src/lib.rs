pub mod analysis;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod polyspectra;
pub mod sme;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use exec::Execution;
