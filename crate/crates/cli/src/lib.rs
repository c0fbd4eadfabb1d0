//! Pipeline commands behind the `hqc` binary, callable as a library.

pub mod commands;
pub mod util;
