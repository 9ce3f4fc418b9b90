pub mod bitset;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod learning;
pub mod mip;
pub mod model;
pub mod plots;
pub mod problems;
pub mod sampler;
pub mod stats;
pub mod surrogate;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
