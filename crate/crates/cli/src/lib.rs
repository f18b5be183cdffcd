//! Command-line front end: configuration handling and command dispatch.

pub mod app;
pub mod config;
