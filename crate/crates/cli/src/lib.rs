//! Command implementations behind the `rulebench` binary.

pub mod analyze;
pub mod eval;
pub mod manifest;
pub mod report;
pub mod single;
