pub mod baselines;
pub mod environments;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod experts;
pub mod hierarchy;
pub mod learner;
pub mod numerics;
pub mod policy;

pub use error::{Error, Result};
