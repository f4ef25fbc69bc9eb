pub mod association;
pub mod confidence;
pub mod error;
pub mod metrics;
pub mod reid;
pub mod revision;
pub mod skeleton;
pub mod synth;
pub mod toolkit;
pub mod tracker;

pub use error::{Error, Result};
