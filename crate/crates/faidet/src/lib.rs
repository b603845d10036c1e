//! Experiment harness for `faidet-core`: TOML configuration, Monte-Carlo
//! sweeps with common random numbers, CSV output, a single-trial report
//! and an oracle self-test.

pub mod config;
pub mod experiments;
pub mod inspect;
pub mod oracle;
pub mod selftest;
