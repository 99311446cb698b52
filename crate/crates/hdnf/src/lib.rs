//! Files, checkpoints, experiment matrices and plot tables on top of
//! `hdnf-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod plot;
pub mod table;

pub use error::{Error, Result};
