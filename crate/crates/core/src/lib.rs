pub mod asymptotics;
pub mod catalog;
pub mod error;
pub mod format;
pub mod generalized_functions;
pub mod growth_spaces;
pub mod kernel;
pub mod projection;
pub mod quadrature;
pub mod regression;
pub mod scaling_engine;

pub use error::{Error, Result};
