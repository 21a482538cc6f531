//! Perception-to-safety modelling for human-robot collaboration.
//!
//! Converts detector metrics (recall, IoU, latency) into collision
//! probabilities for a gripper approaching a human hand, averages them into
//! the critical (CCP) and average (ACP) collision probabilities, and
//! simulates an attentive detection pipeline that produces those metrics.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod attentive;
pub mod collision;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod simkit;

pub use error::{Error, Result};
