//! Command-line front end for `hetcr`: configuration, subcommands, model
//! files and curve output.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;
pub mod output;
