//! Batch commands and the interactive session server.

pub mod commands;
pub mod server;
pub mod store;
