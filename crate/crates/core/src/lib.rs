pub mod dataio;
pub mod degradation;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod nets;
pub mod optim;
pub mod pipeline;
pub mod sampling;

pub use error::{Error, Result};
