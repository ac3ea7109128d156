//! Simulator for a neural daylight-compensating lighting controller.
//!
//! A tanh/linear controller network regulates working-plane illuminance on a
//! look-up-table lamp model while a second network learns the inverse of the
//! process online and supplies the controller's training targets. All
//! signals cross the loop as 8-bit converter codes.

pub mod config;
pub mod control;
pub mod error;
pub mod metrics;
pub mod output;
pub mod plant;
pub mod rng;
pub mod signals;
pub mod tinynet;

pub use error::{Error, Result};
