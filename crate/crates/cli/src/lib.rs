//! Library side of the `perfcast` command: configuration, corpus-level
//! pipeline steps and subcommand handlers.

pub mod app;
pub mod config;
pub mod pipeline;

pub use config::ToolConfig;
