//! Multi-worker local gradient method simulator with adaptive batch-size
//! controllers, plus the analysis toolkit that verifies convergence and
//! variance behavior on desk-scale finite-sum problems.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;
