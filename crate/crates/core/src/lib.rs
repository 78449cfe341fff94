pub mod acceptance;
pub mod classical;
pub mod error;
pub mod fiber;
pub mod perturbation;
pub mod phases;
pub mod profile;
pub mod strip;
pub mod symbolic;
pub mod tridiag;

pub use error::{Error, Result};
