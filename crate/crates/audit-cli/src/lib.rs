//! Library side of the `audit` binary: command implementations and the
//! HTTP provider, kept out of `main.rs` so integration tests can exercise
//! them directly.

pub mod commands;
pub mod http_provider;
