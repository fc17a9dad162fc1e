//! Instance generation and experiment driver for the `randswitch` library.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod generator;
