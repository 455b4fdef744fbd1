//! File formats, configuration and the command line around
//! [`roomfill_core`].
//!
//! * [`wav`]: 16/24/32-bit PCM and 32-bit float WAV in and out.
//! * [`config`]: the TOML run configuration.
//! * [`design_file`]: versioned TOML design files.
//! * [`report`]: CSV verification reports.
//! * [`pipeline`]: design and simulation with both sides run concurrently.
//! * [`cli`]: the `roomfill` subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod design_file;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod wav;

pub use error::{exit, AppError, AppResult};
