pub mod analysis;
pub mod cli;
pub mod data;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod mcmc;
pub mod model;
pub mod sample_size;
pub mod splines;

pub use error::{Error, Result};
