//! UAV delivery network core: radio channel, coverage layers, backhaul
//! connectivity, task routing, station placement learning and planning.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod c2;
pub mod channel;
pub mod deployment;
pub mod pipeline;
pub mod planner;
pub mod scenario;
pub mod tasking;
pub mod topology;
