//! Library face of the command-line driver, split out so integration tests
//! can exercise config parsing, the sequence file format, and the commands
//! without spawning the binary.

pub mod commands;
pub mod config;
pub mod seqfile;
