//! Service layer for the sipsense engine: configuration, the engine loop,
//! the HTTP API and the command-line entry points.

pub mod cli;
pub mod config;
pub mod http;
pub mod report;
pub mod service;
