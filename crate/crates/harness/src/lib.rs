//! Human-evaluation service and command-line front end for `defgraph`.

pub mod assign;
pub mod cli;
pub mod config;
pub mod journal;
pub mod pool;
pub mod server;

pub use assign::{assign_judges, Session};
pub use server::{Harness, HarnessError, HarnessOptions, ServerHandle};
