//! Command-line front end for the `evlearn` library.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{emit, Cmd, Output};
pub use config::{Config, UsageError};
pub use table::{ingest_csv, Columns};
