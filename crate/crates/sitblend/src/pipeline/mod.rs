//! End-to-end runs: chart spec and background in, run directory with
//! artifacts, legibility report and manifest out.

mod config;
mod manifest;
mod run;

pub use config::*;
pub use manifest::*;
pub use run::*;
