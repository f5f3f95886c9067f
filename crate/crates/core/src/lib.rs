pub mod bounds;
pub mod cli;
pub mod collision;
pub mod eraser;
pub mod error;
pub mod heisenberg;
pub mod numerics;
pub mod parallel;
pub mod pbs_channel;
pub mod rng;

pub use error::{Error, Result};
