pub mod action;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod group_window;
pub mod hull;
pub mod irs;
pub mod moment;
pub mod probe;
pub mod random_partition;

pub use error::{Error, Result};
