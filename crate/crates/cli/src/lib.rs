//! Experiment drivers behind the `privsel` binary.

pub mod experiment;
pub mod game;
