//! Experiment runner and bound verification for `mnm-core`.
//!
//! A run is described by a TOML file ([`config`]), executed by
//! [`experiments`], and written as long-format CSV by [`records`]. The
//! [`verify`] module holds the randomized property suites behind
//! `mnm-lab verify-bounds`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod records;
pub mod seeding;
pub mod verify;

pub use error::{LabError, Result};
