//! Command-line front end: configuration document, subcommands and plain-file output.

pub mod commands;
pub mod document;
pub mod output;
pub mod svg;
