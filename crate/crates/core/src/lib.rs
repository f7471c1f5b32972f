//! Differentially private logistic regression trained by two computing
//! parties over additively secret-shared data.

pub mod bench;
pub mod clear;
pub mod data;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod fixed;
pub mod math;
pub mod ml;
pub mod mpc;
pub mod runtime;

pub use error::{Error, Result};
pub use fixed::{FixedPointValue, RingConfig, RingElement};
