//! Pulse-level simulation and calibration of generalized cross-resonance
//! gates between two coupled transmon qutrits.

pub mod calibration;
pub mod device;
pub mod effective;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod propagator;
pub mod pulse;
pub mod simulate;

pub use error::{Error, Result};
