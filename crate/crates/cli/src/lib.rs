//! Library side of the `svdmarg` binary.
//!
//! The binary is a thin shell over these modules: [`opts`] defines the
//! command-line surface and resolves it against a [`config`] file,
//! [`csvio`] reads and writes the CSV formats, [`report`] renders the
//! JSON summary and the bench table, and [`commands`] drives the
//! numerical pipeline from the `svdmarg` library. Keeping the logic
//! here makes every piece reachable from integration tests.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod opts;
pub mod report;

pub use error::{CliError, Result};
