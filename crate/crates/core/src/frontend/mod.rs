//! Configuration, CSV files and the command implementations behind `barsim`.

pub mod commands;
pub mod config;
pub mod csv;

pub use commands::{
    cmd_load, cmd_scan, cmd_tensor, cmd_validate, exit_code, regenerate, ValidationReport,
};
pub use config::{LoadSettings, RunConfig, ScanGrid, ValidateSettings};
pub use csv::{strip_timestamp, CsvDoc};
