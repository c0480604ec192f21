pub mod dist;
pub mod dktest;
pub mod error;
pub mod fit;
pub mod optim;
pub mod rvcalc;
pub mod specfun;

pub use error::{Error, Result};
