//! Pipeline commands, analytics snapshots and the read-only HTTP service
//! behind the `voc` binary.

pub mod commands;
pub mod server;
pub mod snapshot;
