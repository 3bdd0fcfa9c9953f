//! Configuration, FASTA/FASTQ input and output, presets, orchestration and
//! reporting for the `dnachannel` command.

pub mod config;
pub mod error;
pub mod io;
pub mod presets;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::ChannelConfig;
pub use error::{CliError, Result};
pub use report::Report;
