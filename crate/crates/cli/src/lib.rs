//! Command implementations behind the `privnav` binary.

pub mod bench;
pub mod circuit_cmd;
pub mod nodes;
pub mod selftest;
