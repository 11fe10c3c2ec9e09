//! Monte-Carlo harness and capacity limits.

mod capacity;
mod sweep;

pub use capacity::*;
pub use sweep::*;
