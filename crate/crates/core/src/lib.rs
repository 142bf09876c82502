//! Simulation and analysis of coupler-drive ZZ cancellation in tunable-coupler
//! superconducting circuits.

pub mod cancel;
pub mod chain;
pub mod config;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod frame;
pub mod linalg;
pub mod qops;
pub mod rb;
pub mod spectrum;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
