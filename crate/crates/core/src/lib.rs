pub mod embedding;
pub mod error;
pub mod linalg;
pub mod objective;

pub use error::{Error, Result};
pub mod surrogate;
pub mod swarm;
pub mod bandit;
pub mod mo_acq;
pub mod driver;
