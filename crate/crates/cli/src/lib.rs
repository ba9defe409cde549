//! Library surface of the `mfcalib` binary, exposed so integration
//! tests can reuse the subcommand plumbing and bundle layout.

pub mod commands;
pub mod jet;
