//! Problem files, reports and the command-line driver around `dred-core`.

pub mod commands;
pub mod problem;

pub use commands::{Report, Settings, Target};
pub use problem::{LoadError, Problem};
