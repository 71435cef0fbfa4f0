//! Command-line front end: `calibrate`, `plan`, `simulate`, `sweep`,
//! `bench-partition`, `scenario` and `replay`.
//!
//! Each command resolves its flags into a [`manifest::CommandConfig`],
//! executes it without touching the filesystem, then writes the outputs
//! atomically together with a [`manifest::RunManifest`].

pub mod cli;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;

pub use cli::run;
