//! Operator front end for `ccs-core`: invariant verification, parameter
//! tables, direct/FFT benchmarks, toy training and weight files.

pub mod bench;
pub mod cli;
pub mod error;
pub mod params;
pub mod verify;
pub mod weights;

pub use cli::run;
pub use error::{CliError, CliResult};
