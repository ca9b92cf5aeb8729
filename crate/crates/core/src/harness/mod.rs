//! Configuration, runs, studies and the command-line front end.

pub mod config;
pub mod snapshot;
pub mod trajectory;
pub mod runs;
pub mod study;
pub mod verify;
pub mod cli;
