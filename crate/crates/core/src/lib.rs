pub mod constants;
pub mod covariance;
pub mod error;
pub mod fractal;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod specfun;
pub mod steep;
pub mod stats;
pub mod testfn;
pub mod verify;

pub use error::{Error, Result};
