//! Elastic source imaging: forward Lamé simulation, time-reversal imaging and
//! the Hankel / convolutional-framelet machinery used to regularize it.

pub mod elastic;
pub mod error;
pub mod framelets;
pub mod grid;
pub mod hankel;
pub mod helmholtz;
pub mod learning;
pub mod metrics;
pub mod phantoms;
pub mod pipeline;
pub mod pooling;
pub mod rng;
pub mod sensing;
pub mod spectral;
pub mod time_reversal;
pub mod tv;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
