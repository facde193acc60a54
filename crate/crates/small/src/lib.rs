//! File formats, evaluation harnesses, and the command-line tool around
//! [`small_core`].

pub mod cli;
pub mod data;
pub mod harness;
pub mod model_io;
pub mod synth;

pub use small_core;
