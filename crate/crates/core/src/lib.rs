//! Resilience analysis for linear systems that lose authority over some of
//! their bounded actuators.

pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
mod lp;
pub mod quantitative;
pub mod reachability;
pub mod resilience;
pub mod scenario;
pub mod zonotope;

pub use config::{Caps, Settings, Tolerances};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
