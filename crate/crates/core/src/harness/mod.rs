//! Configuration, persistence, synthetic data and the end-to-end commands.

mod commands;
pub mod config;
pub mod io;
pub mod synth;

pub use commands::*;
pub use config::RunConfig;
pub use synth::{generate, SynthOutput, SyntheticRecording, SyntheticScenario};
