//! File formats, completion transports, parallel evaluation and the
//! command-line driver around `nanoop-core`.

pub mod data;
pub mod formats;
pub mod parallel;
pub mod transport;
pub mod project;
pub mod cli;
